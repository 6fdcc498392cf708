#include "socialrec/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "socialrec/checkpoint.hpp"
#include "socialrec/error.hpp"
#include "socialrec/rng.hpp"
#include "tsv.hpp"

namespace socialrec {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("world config: " + what);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::string serialize_pairs(const std::vector<std::pair<std::uint64_t, std::size_t>>& pairs) {
  std::string out;
  for (const auto& [id, group] : pairs) {
    out += std::to_string(id);
    out += '\t';
    out += std::to_string(group);
    out += '\n';
  }
  return out;
}

constexpr double kSecondsPerDay = 86400.0;
// Keeps cold users' training and test events clear of the split cutoff.
constexpr double kCutoffMargin = 3600.0;

}  // namespace

void WorldConfig::validate() const {
  require(groups >= 1, "groups must be >= 1");
  require(users_per_group >= 1, "users_per_group must be >= 1");
  require(!relations.empty(), "at least one relation type required");
  require(entities_per_group >= 1, "entities_per_group must be >= 1");
  require(max_entities_per_user >= 1, "max_entities_per_user must be >= 1");
  require(items_per_group >= 1, "items_per_group must be >= 1");
  for (auto [p, name] : {std::pair{leak, "leak"}, {presence, "presence"},
                         {own_group_impressions, "own_group_impressions"}, {p_match, "p_match"},
                         {p_other, "p_other"}, {label_noise, "label_noise"},
                         {cold_fraction, "cold_fraction"}}) {
    require(is_probability(p), std::string(name) + " must lie in [0, 1]");
  }
  require(warm_min >= 1 && warm_min <= warm_max, "need 1 <= warm_min <= warm_max");
  require(cold_test_min <= cold_test_max, "need cold_test_min <= cold_test_max");
  require(warm_min > cold_threshold, "warm_min must exceed cold_threshold");
  require(horizon_days > 0.0, "horizon_days must be positive");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  const double cutoff = train_fraction * horizon_days * kSecondsPerDay;
  require(cutoff > kCutoffMargin && horizon_days * kSecondsPerDay - cutoff > kCutoffMargin,
          "horizon too short around the train/test cutoff");
}

std::string GroundTruth::serialize_users() const { return serialize_pairs(user_groups); }
std::string GroundTruth::serialize_items() const { return serialize_pairs(item_groups); }

std::vector<std::pair<std::uint64_t, std::size_t>> GroundTruth::parse_pairs(std::string_view text,
                                                                             std::string_view what) {
  std::vector<std::pair<std::uint64_t, std::size_t>> out;
  tsv::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = tsv::split(line);
    if (fields.size() != 2) throw DataError(tsv::where(what, line_no) + "expected 2 tab-separated fields");
    out.emplace_back(tsv::parse_int<std::uint64_t>(fields[0], what, line_no, "id"),
                     tsv::parse_int<std::size_t>(fields[1], what, line_no, "group id"));
  });
  std::sort(out.begin(), out.end());
  return out;
}

World generate_world(const WorldConfig& config) {
  config.validate();
  const std::size_t num_groups = config.groups;
  const std::size_t num_users = config.user_count();
  const std::size_t num_items = config.item_count();
  const std::size_t num_relations = config.relations.size();
  const std::size_t pool = config.entities_per_group;

  const double horizon = config.horizon_days * kSecondsPerDay;
  const double cutoff = config.train_fraction * horizon;

  World world;
  world.config = config;

  std::vector<ItemId> items(num_items);
  std::vector<std::size_t> categories(num_items);
  for (std::size_t t = 0; t < num_items; ++t) {
    items[t] = t;
    categories[t] = t % num_groups;
    world.truth.item_groups.emplace_back(t, t % num_groups);
  }
  world.catalog = ItemCatalog(std::move(items), std::move(categories));

  std::vector<SocialRecord> records;
  for (UserId u = 0; u < num_users; ++u) {
    const std::size_t group = u % num_groups;
    world.truth.user_groups.emplace_back(u, group);
    Rng rng = make_rng(config.seed, "world.user", u);

    std::vector<bool> present(num_relations);
    bool any = false;
    for (std::size_t l = 0; l < num_relations; ++l) {
      present[l] = bernoulli(rng, config.presence);
      any = any || present[l];
    }
    if (!any) present[uniform_int(rng, 0, num_relations - 1)] = true;

    for (std::size_t l = 0; l < num_relations; ++l) {
      if (!present[l]) continue;
      const auto count = uniform_int(rng, 1, config.max_entities_per_user);
      for (std::uint64_t i = 0; i < count; ++i) {
        std::size_t source = group;
        if (num_groups > 1 && bernoulli(rng, config.leak)) {
          source = (group + 1 + uniform_int(rng, 0, num_groups - 2)) % num_groups;
        }
        records.push_back({u, l, source * pool + uniform_int(rng, 0, pool - 1)});
      }
    }

    const bool cold = bernoulli(rng, config.cold_fraction);
    auto impression = [&](double t_lo, double t_hi) {
      ItemId item;
      if (bernoulli(rng, config.own_group_impressions)) {
        item = group + num_groups * uniform_int(rng, 0, config.items_per_group - 1);
      } else {
        item = uniform_int(rng, 0, num_items - 1);
      }
      const double p = item % num_groups == group ? config.p_match : config.p_other;
      int label = bernoulli(rng, p) ? 1 : 0;
      // Drawn even at zero noise so the noise knob does not shift any other draw.
      if (bernoulli(rng, config.label_noise)) label = 1 - label;
      const auto ts = static_cast<std::int64_t>(std::floor(t_lo + uniform01(rng) * (t_hi - t_lo)));
      world.log.push_back({u, item, label, ts});
    };
    if (cold) {
      const auto n_train = uniform_int(rng, 0, config.cold_threshold);
      const auto n_test = uniform_int(rng, config.cold_test_min, config.cold_test_max);
      for (std::uint64_t i = 0; i < n_train; ++i) impression(0.0, cutoff - kCutoffMargin);
      for (std::uint64_t i = 0; i < n_test; ++i) impression(cutoff + kCutoffMargin, horizon);
    } else {
      const auto n = uniform_int(rng, config.warm_min, config.warm_max);
      for (std::uint64_t i = 0; i < n; ++i) impression(0.0, horizon);
    }
  }

  world.graph = SocialGraph(RelationSchema(config.relations), records);
  std::stable_sort(world.log.begin(), world.log.end(), [](const auto& a, const auto& b) {
    return a.timestamp < b.timestamp;
  });
  return world;
}

WorldFiles WorldFiles::in(const std::filesystem::path& dir) {
  return {dir / "social.tsv", dir / "interactions.tsv", dir / "items.tsv", dir / "truth_users.tsv",
          dir / "truth_items.tsv"};
}

void write_world(const World& world, const WorldFiles& files) {
  write_social_file(files.social, world.graph);
  write_interactions_file(files.interactions, world.log);
  write_file(files.items, world.catalog.serialize());
  write_file(files.truth_users, world.truth.serialize_users());
  write_file(files.truth_items, world.truth.serialize_items());
}

}  // namespace socialrec
