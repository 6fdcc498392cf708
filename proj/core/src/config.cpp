#include "socialrec/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>

#include "socialrec/checkpoint.hpp"
#include "socialrec/error.hpp"

namespace socialrec {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string bad_value(std::string_view key, std::string_view value) {
  return "config: invalid value '" + std::string(value) + "' for " + std::string(key);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  if constexpr (std::is_same_v<T, bool>) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(bad_value(key, value));
  } else if constexpr (std::is_floating_point_v<T>) {
    try {
      return parse_double(value);
    } catch (const Error&) {
      throw ConfigError(bad_value(key, value));
    }
  } else {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (value.empty() || ec != std::errc() || ptr != end) throw ConfigError(bad_value(key, value));
    return out;
  }
}

template <typename T>
std::string show(T v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else {
    return std::to_string(v);
  }
}

struct Field {
  std::function<void(ExperimentConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <auto Group, auto Member>
Field nested() {
  using T = std::remove_cvref_t<decltype(std::declval<ExperimentConfig&>().*Group.*Member)>;
  return {[](ExperimentConfig& c, std::string_view key, std::string_view value) {
            c.*Group.*Member = parse_number<T>(key, value);
          },
          [](const ExperimentConfig& c) { return show(c.*Group.*Member); }};
}

template <auto Member>
Field top() {
  using T = std::remove_cvref_t<decltype(std::declval<ExperimentConfig&>().*Member)>;
  return {[](ExperimentConfig& c, std::string_view key, std::string_view value) {
            c.*Member = parse_number<T>(key, value);
          },
          [](const ExperimentConfig& c) { return show(c.*Member); }};
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    auto comma = value.find(',', pos);
    if (comma == std::string_view::npos) comma = value.size();
    const auto item = trim(value.substr(pos, comma - pos));
    if (!item.empty()) out.emplace_back(item);
    pos = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

const std::map<std::string, Field, std::less<>>& fields() {
  static const auto table = [] {
    using C = ExperimentConfig;
    std::map<std::string, Field, std::less<>> f;
    f["seed"] = top<&C::seed>();
    f["repeats"] = top<&C::repeats>();
    f["cold_threshold"] = top<&C::cold_threshold>();
    f["train_fraction"] = top<&C::train_fraction>();
    f["variant"] = {[](C& c, std::string_view, std::string_view v) { c.variant = parse_variant(v); },
                    [](const C& c) { return std::string(to_string(c.variant)); }};
    f["variants"] = {[](C& c, std::string_view key, std::string_view v) {
                       c.variants.clear();
                       for (const auto& name : split_list(v)) c.variants.push_back(parse_variant(name));
                       if (c.variants.empty()) throw ConfigError(bad_value(key, v));
                     },
                     [](const C& c) {
                       std::vector<std::string> names;
                       for (auto v : c.variants) names.emplace_back(to_string(v));
                       return join(names);
                     }};
    f["data"] = {[](C& c, std::string_view, std::string_view v) { c.data_dir = v; },
                 [](const C& c) { return c.data_dir; }};
    f["out"] = {[](C& c, std::string_view, std::string_view v) { c.out_dir = v; },
                [](const C& c) { return c.out_dir; }};

    f["world.groups"] = nested<&C::world, &WorldConfig::groups>();
    f["world.users_per_group"] = nested<&C::world, &WorldConfig::users_per_group>();
    f["world.relations"] = {[](C& c, std::string_view key, std::string_view v) {
                              auto names = split_list(v);
                              if (names.empty()) throw ConfigError(bad_value(key, v));
                              c.world.relations = std::move(names);
                            },
                            [](const C& c) { return join(c.world.relations); }};
    f["world.entities_per_group"] = nested<&C::world, &WorldConfig::entities_per_group>();
    f["world.max_entities_per_user"] = nested<&C::world, &WorldConfig::max_entities_per_user>();
    f["world.leak"] = nested<&C::world, &WorldConfig::leak>();
    f["world.presence"] = nested<&C::world, &WorldConfig::presence>();
    f["world.items_per_group"] = nested<&C::world, &WorldConfig::items_per_group>();
    f["world.own_group_impressions"] = nested<&C::world, &WorldConfig::own_group_impressions>();
    f["world.p_match"] = nested<&C::world, &WorldConfig::p_match>();
    f["world.p_other"] = nested<&C::world, &WorldConfig::p_other>();
    f["world.label_noise"] = nested<&C::world, &WorldConfig::label_noise>();
    f["world.cold_fraction"] = nested<&C::world, &WorldConfig::cold_fraction>();
    f["world.cold_threshold"] = nested<&C::world, &WorldConfig::cold_threshold>();
    f["world.warm_min"] = nested<&C::world, &WorldConfig::warm_min>();
    f["world.warm_max"] = nested<&C::world, &WorldConfig::warm_max>();
    f["world.cold_test_min"] = nested<&C::world, &WorldConfig::cold_test_min>();
    f["world.cold_test_max"] = nested<&C::world, &WorldConfig::cold_test_max>();
    f["world.horizon_days"] = nested<&C::world, &WorldConfig::horizon_days>();
    f["world.train_fraction"] = nested<&C::world, &WorldConfig::train_fraction>();

    f["ccm.groups"] = nested<&C::ccm, &CcmConfig::groups>();
    f["ccm.relation_dim"] = nested<&C::ccm, &CcmConfig::relation_dim>();
    f["ccm.hidden"] = nested<&C::ccm, &CcmConfig::hidden>();
    f["ccm.cluster_epochs"] = nested<&C::ccm, &CcmConfig::cluster_epochs>();
    f["ccm.calibrator_epochs"] = nested<&C::ccm, &CcmConfig::calibrator_epochs>();
    f["ccm.eta_start"] = nested<&C::ccm, &CcmConfig::eta_start>();
    f["ccm.eta_end"] = nested<&C::ccm, &CcmConfig::eta_end>();
    f["ccm.learning_rate"] = nested<&C::ccm, &CcmConfig::learning_rate>();
    f["ccm.cluster_net_learning_rate"] = nested<&C::ccm, &CcmConfig::cluster_net_learning_rate>();
    f["ccm.temperature"] = nested<&C::ccm, &CcmConfig::temperature>();
    f["ccm.mask_fraction"] = nested<&C::ccm, &CcmConfig::mask_fraction>();
    f["ccm.min_group_size"] = nested<&C::ccm, &CcmConfig::min_group_size>();
    f["ccm.merge_recompute"] = nested<&C::ccm, &CcmConfig::merge_recompute>();
    f["ccm.calibrator_holdout"] = nested<&C::ccm, &CcmConfig::calibrator_holdout>();
    f["ccm.entity_init_scale"] = nested<&C::ccm, &CcmConfig::entity_init_scale>();
    f["ccm.prototype_init_scale"] = nested<&C::ccm, &CcmConfig::prototype_init_scale>();
    f["ccm.prototype_init"] = {
        [](C& c, std::string_view, std::string_view v) { c.ccm.prototype_init = parse_prototype_init(v); },
        [](const C& c) { return to_string(c.ccm.prototype_init); }};
    f["ccm.cluster_population"] = {
        [](C& c, std::string_view, std::string_view v) {
          c.ccm.cluster_population = parse_cluster_population(v);
        },
        [](const C& c) { return to_string(c.ccm.cluster_population); }};

    f["rec.behavior_dim"] = nested<&C::rec, &RecommenderConfig::behavior_dim>();
    f["rec.hidden1"] = nested<&C::rec, &RecommenderConfig::hidden1>();
    f["rec.hidden2"] = nested<&C::rec, &RecommenderConfig::hidden2>();
    f["rec.match_dim"] = nested<&C::rec, &RecommenderConfig::match_dim>();
    f["rec.attention_hidden"] = nested<&C::rec, &RecommenderConfig::attention_hidden>();
    f["rec.epochs"] = nested<&C::rec, &RecommenderConfig::epochs>();
    f["rec.batch_size"] = nested<&C::rec, &RecommenderConfig::batch_size>();
    f["rec.learning_rate"] = nested<&C::rec, &RecommenderConfig::learning_rate>();
    f["rec.embedding_init_scale"] = nested<&C::rec, &RecommenderConfig::embedding_init_scale>();
    f["rec.validation_fraction"] = nested<&C::rec, &RecommenderConfig::validation_fraction>();
    f["rec.patience"] = nested<&C::rec, &RecommenderConfig::patience>();
    return f;
  }();
  return table;
}

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  try {
    it->second.set(*this, key, trim(value));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + std::string(key) + ": " + e.what());
  }
}

std::string ExperimentConfig::get(std::string_view key) const {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& ExperimentConfig::keys() {
  static const auto out = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : fields()) k.push_back(name);
    return k;
  }();
  return out;
}

std::string ExperimentConfig::echo() const {
  std::string out;
  for (const auto& key : keys()) {
    out += key;
    out += " = ";
    out += get(key);
    out += '\n';
  }
  return out;
}

void ExperimentConfig::validate() const {
  world.validate();
  if (repeats == 0) throw ConfigError("config: repeats must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("config: train_fraction must lie in (0, 1)");
  if (ccm.groups == 0) throw ConfigError("config: ccm.groups must be >= 1");
  if (!(ccm.mask_fraction >= 0.0 && ccm.mask_fraction < 1.0)) {
    throw ConfigError("config: ccm.mask_fraction must lie in [0, 1)");
  }
  if (!(ccm.temperature > 0.0)) throw ConfigError("config: ccm.temperature must be positive");
  if (!(ccm.calibrator_holdout >= 0.0 && ccm.calibrator_holdout < 1.0)) {
    throw ConfigError("config: ccm.calibrator_holdout must lie in [0, 1)");
  }
  if (rec.batch_size == 0) throw ConfigError("config: rec.batch_size must be >= 1");
  if (rec.patience == 0) throw ConfigError("config: rec.patience must be >= 1");
  if (!(rec.validation_fraction >= 0.0 && rec.validation_fraction < 1.0)) {
    throw ConfigError("config: rec.validation_fraction must lie in [0, 1)");
  }
  if (!(rec.learning_rate > 0.0) || !(ccm.learning_rate > 0.0)) {
    throw ConfigError("config: learning rates must be positive");
  }
}

void apply_config_text(ExperimentConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  ExperimentConfig config;
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  apply_config_text(config, text);
  return config;
}

}  // namespace socialrec
