#include <cstdio>

#include <nlohmann/json.hpp>

#include "socialrec/error.hpp"
#include "socialrec/experiment.hpp"
#include "socialrec/metrics.hpp"

namespace socialrec {

namespace {

using nlohmann::json;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string percent_or_dash(const std::optional<double>& v) { return v ? format_percent(*v) : "-"; }

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

std::string render_table(const BenchResult& result) {
  std::string out;
  const auto summary = summarize(result);
  out += pad("variant", 16) + pad("FULL AUC", 10) + pad("Imp.%", 9) + pad("COLD AUC", 10) + pad("Imp.%", 9) +
         pad("groups", 8) + "ARI\n";
  for (const auto& s : summary) {
    std::size_t groups = 0;
    std::size_t n = 0;
    for (const auto& r : result.reports) {
      if (r.variant == s.variant && r.groups) {
        groups += *r.groups;
        ++n;
      }
    }
    out += pad(std::string(to_string(s.variant)), 16) + pad(fixed(s.auc_full, 4), 10) +
           pad(percent_or_dash(s.improvement_full), 9) + pad(fixed(s.auc_cold, 4), 10) +
           pad(percent_or_dash(s.improvement_cold), 9) +
           pad(n ? fixed(static_cast<double>(groups) / static_cast<double>(n), 1) : "-", 8) +
           (s.ari ? fixed(*s.ari, 4) : "-") + "\n";
  }

  out += "\ncold AUC delta vs vanilla over seeds (mean +- sd)\n";
  for (const auto& s : summary) {
    if (s.variant == Variant::kVanilla) continue;
    out += pad(std::string(to_string(s.variant)), 16) + fixed(s.delta_cold_mean, 4) + " +- " +
           fixed(s.delta_cold_stddev, 4) + "\n";
  }

  out += "\nper seed\n";
  out += pad("seed", 8) + pad("variant", 16) + pad("FULL AUC", 10) + pad("COLD AUC", 10) + pad("n full", 8) +
         pad("n cold", 8) + "epoch\n";
  for (const auto& r : result.reports) {
    out += pad(std::to_string(r.seed), 8) + pad(std::string(to_string(r.variant)), 16) +
           pad(fixed(r.auc_full, 4), 10) + pad(fixed(r.auc_cold, 4), 10) + pad(std::to_string(r.full_records), 8) +
           pad(std::to_string(r.cold_records), 8) + std::to_string(r.best_epoch) + "\n";
  }

  if (!result.ccm.empty()) {
    out += "\nccm\n";
    out += pad("seed", 8) + pad("groups", 14) + pad("ARI", 8) + pad("NMI", 8) + pad("student", 9) +
           pad("teacher", 9) + "KL first -> last\n";
    for (const auto& c : result.ccm) {
      const std::string kl = c.calibrator_kl.empty()
                                 ? "-"
                                 : fixed(c.calibrator_kl.front(), 4) + " -> " + fixed(c.calibrator_kl.back(), 4);
      out += pad(std::to_string(c.seed), 8) +
             pad(std::to_string(c.groups_before_merge) + " -> " + std::to_string(c.final_groups), 14) +
             pad(c.ari ? fixed(*c.ari, 4) : "-", 8) + pad(c.nmi ? fixed(*c.nmi, 4) : "-", 8) +
             pad(fixed(c.student_agreement, 4), 9) + pad(fixed(c.teacher_masked_agreement, 4), 9) + kl + "\n";
    }
  }
  return out;
}

std::string results_json(const BenchResult& result) {
  json j;
  j["format_version"] = 1;
  j["config"] = result.config_echo;
  j["reports"] = json::array();
  for (const auto& r : result.reports) {
    j["reports"].push_back({{"variant", std::string(to_string(r.variant))},
                            {"seed", r.seed},
                            {"auc_full", r.auc_full},
                            {"auc_cold", r.auc_cold},
                            {"full_records", r.full_records},
                            {"cold_records", r.cold_records},
                            {"improvement_full", optional_json(r.improvement_full)},
                            {"improvement_cold", optional_json(r.improvement_cold)},
                            {"groups", optional_json(r.groups)},
                            {"ari", optional_json(r.ari)},
                            {"nmi", optional_json(r.nmi)},
                            {"train_loss", r.train_loss},
                            {"validation_auc", r.validation_auc},
                            {"best_epoch", r.best_epoch}});
  }
  j["ccm"] = json::array();
  for (const auto& c : result.ccm) {
    j["ccm"].push_back({{"seed", c.seed},
                        {"cluster_population", c.cluster_population},
                        {"cluster_loss", c.cluster_loss},
                        {"calibrator_kl", c.calibrator_kl},
                        {"min_step_kl", c.min_step_kl},
                        {"holdout_users", c.holdout_users},
                        {"student_agreement", c.student_agreement},
                        {"teacher_masked_agreement", c.teacher_masked_agreement},
                        {"groups_before_merge", c.groups_before_merge},
                        {"final_groups", c.final_groups},
                        {"min_group_size", c.min_group_size},
                        {"ari", optional_json(c.ari)},
                        {"nmi", optional_json(c.nmi)}});
  }
  return j.dump(2) + "\n";
}

BenchResult parse_results_json(std::string_view text) {
  BenchResult result;
  try {
    const auto j = json::parse(text);
    if (j.at("format_version").get<int>() != 1) throw DataError("results file: unsupported format version");
    result.config_echo = j.at("config").get<std::string>();
    for (const auto& e : j.at("reports")) {
      MetricReport r;
      r.variant = parse_variant(e.at("variant").get<std::string>());
      r.seed = e.at("seed").get<std::uint64_t>();
      r.auc_full = e.at("auc_full").get<double>();
      r.auc_cold = e.at("auc_cold").get<double>();
      r.full_records = e.at("full_records").get<std::size_t>();
      r.cold_records = e.at("cold_records").get<std::size_t>();
      r.improvement_full = optional_from<double>(e, "improvement_full");
      r.improvement_cold = optional_from<double>(e, "improvement_cold");
      r.groups = optional_from<std::size_t>(e, "groups");
      r.ari = optional_from<double>(e, "ari");
      r.nmi = optional_from<double>(e, "nmi");
      r.train_loss = e.at("train_loss").get<std::vector<double>>();
      r.validation_auc = e.at("validation_auc").get<std::vector<double>>();
      r.best_epoch = e.at("best_epoch").get<std::size_t>();
      result.reports.push_back(std::move(r));
    }
    for (const auto& e : j.at("ccm")) {
      CcmSummary c;
      c.seed = e.at("seed").get<std::uint64_t>();
      c.cluster_population = e.at("cluster_population").get<std::size_t>();
      c.cluster_loss = e.at("cluster_loss").get<std::vector<double>>();
      c.calibrator_kl = e.at("calibrator_kl").get<std::vector<double>>();
      c.min_step_kl = e.at("min_step_kl").get<double>();
      c.holdout_users = e.at("holdout_users").get<std::size_t>();
      c.student_agreement = e.at("student_agreement").get<double>();
      c.teacher_masked_agreement = e.at("teacher_masked_agreement").get<double>();
      c.groups_before_merge = e.at("groups_before_merge").get<std::size_t>();
      c.final_groups = e.at("final_groups").get<std::size_t>();
      c.min_group_size = e.at("min_group_size").get<std::size_t>();
      c.ari = optional_from<double>(e, "ari");
      c.nmi = optional_from<double>(e, "nmi");
      result.ccm.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("results file: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("results file: ") + e.what());
  }
  return result;
}

}  // namespace socialrec
