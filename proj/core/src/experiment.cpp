#include "socialrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "socialrec/checkpoint.hpp"
#include "socialrec/error.hpp"
#include "socialrec/metrics.hpp"

namespace socialrec {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct StageKey {
  bool calibrate;
  bool merge;
  friend auto operator<=>(const StageKey&, const StageKey&) = default;
};

}  // namespace

LoadedData load_data(const std::filesystem::path& dir, const RelationSchema& schema) {
  const auto files = WorldFiles::in(dir);
  for (const auto& p : {files.social, files.interactions, files.items}) {
    if (!std::filesystem::exists(p)) throw DataError("missing input file " + p.string());
  }
  LoadedData data;
  data.graph = parse_social_file(files.social, schema);
  data.log = parse_interactions_file(files.interactions);
  data.catalog = ItemCatalog::parse(read_file(files.items));
  if (std::filesystem::exists(files.truth_users) && std::filesystem::exists(files.truth_items)) {
    GroundTruth truth;
    truth.user_groups = GroundTruth::parse_pairs(read_file(files.truth_users), "user truth file");
    truth.item_groups = GroundTruth::parse_pairs(read_file(files.truth_items), "item truth file");
    data.truth = std::move(truth);
  }
  return data;
}

LoadedData generate_data(const WorldConfig& world, std::uint64_t seed) {
  auto config = world;
  config.seed = seed;
  auto w = generate_world(config);
  return {std::move(w.graph), std::move(w.log), std::move(w.catalog), std::move(w.truth)};
}

LoadedData obtain_data(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.data_dir.empty()) return generate_data(config.world, seed);
  return load_data(config.data_dir, RelationSchema(config.world.relations));
}

PreparedData prepare_data(LoadedData data, const ExperimentConfig& config) {
  PreparedData out;
  out.split = temporal_split(data.log, config.train_fraction);
  out.cold = cold_split(out.split.train, out.split.test, config.cold_threshold);
  out.dataset = build_dataset(out.split, data.catalog, &data.graph);
  for (std::size_t i = 0; i < out.dataset.test_records.size(); ++i) {
    const auto user = out.dataset.test_records[i].user;
    if (std::binary_search(out.cold.cold_users.begin(), out.cold.cold_users.end(), user)) {
      out.cold_test.push_back(i);
    }
  }
  out.data = std::move(data);
  return out;
}

std::vector<std::size_t> truth_labels(const SocialGraph& graph, const GroundTruth& truth) {
  std::map<UserId, std::size_t> by_user(truth.user_groups.begin(), truth.user_groups.end());
  std::vector<std::size_t> out;
  out.reserve(graph.user_count());
  for (auto user : graph.users()) {
    const auto it = by_user.find(user);
    if (it == by_user.end()) throw DataError("ground truth has no group for user " + std::to_string(user));
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::size_t> assignment_labels(const SocialGraph& graph, const GroupAssignmentTable& table) {
  std::vector<std::size_t> out;
  out.reserve(graph.user_count());
  for (auto user : graph.users()) {
    const auto g = table.group_of(user);
    if (!g) throw DataError("assignment table has no group for user " + std::to_string(user));
    out.push_back(*g);
  }
  return out;
}

std::vector<VariantSummary> summarize(const BenchResult& result) {
  std::vector<Variant> order;
  for (const auto& r : result.reports) {
    if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
  }
  std::map<std::uint64_t, const MetricReport*> baseline;
  for (const auto& r : result.reports) {
    if (r.variant == Variant::kVanilla) baseline[r.seed] = &r;
  }

  std::vector<VariantSummary> out;
  for (auto v : order) {
    VariantSummary s;
    s.variant = v;
    std::vector<double> deltas;
    double ari_sum = 0.0;
    std::size_t n = 0;
    std::size_t n_ari = 0;
    for (const auto& r : result.reports) {
      if (r.variant != v) continue;
      s.auc_full += r.auc_full;
      s.auc_cold += r.auc_cold;
      ++n;
      if (r.ari) {
        ari_sum += *r.ari;
        ++n_ari;
      }
      if (const auto it = baseline.find(r.seed); it != baseline.end()) {
        deltas.push_back(r.auc_cold - it->second->auc_cold);
      }
    }
    s.auc_full /= static_cast<double>(n);
    s.auc_cold /= static_cast<double>(n);
    if (n_ari > 0) s.ari = ari_sum / static_cast<double>(n_ari);
    if (!deltas.empty()) {
      for (auto d : deltas) s.delta_cold_mean += d;
      s.delta_cold_mean /= static_cast<double>(deltas.size());
      for (auto d : deltas) s.delta_cold_stddev += (d - s.delta_cold_mean) * (d - s.delta_cold_mean);
      s.delta_cold_stddev = deltas.size() > 1
                                ? std::sqrt(s.delta_cold_stddev / static_cast<double>(deltas.size() - 1))
                                : 0.0;
    }
    out.push_back(s);
  }
  const auto base = std::find_if(out.begin(), out.end(), [](const auto& s) { return s.variant == Variant::kVanilla; });
  if (base != out.end()) {
    for (auto& s : out) {
      if (s.variant == Variant::kVanilla) continue;
      s.improvement_full = relative_improvement(s.auc_full, base->auc_full);
      s.improvement_cold = relative_improvement(s.auc_cold, base->auc_cold);
    }
  }
  return out;
}

void run_stage(std::string_view stage, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const DataError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string(stage), e.what());
  }
}

BenchResult run_experiment(const ExperimentConfig& config, std::span<const Variant> variants,
                           const RunOptions& options) {
  config.validate();
  std::vector<Variant> plan = {Variant::kVanilla};
  for (auto v : variants) {
    if (std::find(plan.begin(), plan.end(), v) == plan.end()) plan.push_back(v);
  }
  const bool any_social = std::any_of(plan.begin(), plan.end(), uses_social);

  auto log = [&](const std::string& line) {
    if (options.log) *options.log << line << '\n' << std::flush;
  };
  auto timing = [&](std::uint64_t seed, std::string_view stage, Clock::time_point start) {
    if (options.timing) *options.timing << seed << '\t' << stage << '\t' << seconds_since(start) << '\n';
  };

  BenchResult result;
  result.config_echo = config.echo();
  const std::filesystem::path out_root = config.out_dir;

  for (std::size_t rep = 0; rep < config.repeats; ++rep) {
    const std::uint64_t seed = config.seed + rep;
    const auto seed_dir = out_root / ("seed-" + std::to_string(seed));
    log("seed " + std::to_string(seed) + ": data");
    auto start = Clock::now();
    PreparedData prepared;
    run_stage("data", [&] { prepared = prepare_data(obtain_data(config, seed), config); });
    timing(seed, "data", start);
    const auto& graph = prepared.data.graph;
    const auto& dataset = prepared.dataset;
    if (prepared.cold_test.empty()) log("seed " + std::to_string(seed) + ": warning: cold split is empty");

    std::optional<std::vector<std::size_t>> truth;
    if (prepared.data.truth) truth = truth_labels(graph, *prepared.data.truth);

    CcmModel ccm;
    std::map<StageKey, Grouping> groupings;
    std::map<StageKey, SocialContext> contexts;
    std::string ccm_hash;
    if (any_social) {
      log("seed " + std::to_string(seed) + ": ccm");
      start = Clock::now();
      run_stage("train-ccm", [&] { ccm = train_ccm(graph, config.ccm, seed, true); });
      timing(seed, "train-ccm", start);

      CcmSummary summary;
      summary.seed = seed;
      summary.cluster_population = ccm.cluster.population;
      summary.cluster_loss = ccm.cluster.epoch_loss;
      if (ccm.calibrator) {
        summary.calibrator_kl = ccm.calibrator->epoch_kl;
        summary.min_step_kl = ccm.calibrator->min_step_kl;
        summary.holdout_users = ccm.calibrator->holdout_users.size();
        summary.student_agreement = ccm.calibrator->student_agreement;
        summary.teacher_masked_agreement = ccm.calibrator->teacher_masked_agreement;
      }

      start = Clock::now();
      run_stage("assign", [&] {
        for (auto v : plan) {
          if (!uses_social(v)) continue;
          const auto stages = ccm_stages(v);
          const StageKey key{stages.calibrate, stages.merge};
          if (groupings.count(key)) continue;
          groupings.emplace(key, group_users(graph, ccm, stages));
          contexts.emplace(key, build_social_context(graph, ccm.table, groupings.at(key).assignments,
                                                     dataset.users));
        }
      });
      timing(seed, "assign", start);

      const StageKey full{true, true};
      const Grouping& reference = groupings.count(full) ? groupings.at(full) : groupings.begin()->second;
      summary.groups_before_merge = reference.groups_before_merge;
      summary.final_groups = reference.assignments.group_count();
      summary.min_group_size = reference.min_group_size;
      if (truth) {
        const auto labels = assignment_labels(graph, reference.assignments);
        summary.ari = adjusted_rand_index(*truth, labels);
        summary.nmi = normalized_mutual_information(*truth, labels);
      }
      result.ccm.push_back(summary);

      const auto ckpt = ccm_checkpoint(graph, ccm, reference);
      const auto text = ckpt.serialize();
      ccm_hash = hex64(fnv1a(text));
      if (options.write_artifacts) {
        write_file(seed_dir / "ccm.ckpt", text);
        for (const auto& [key, grouping] : groupings) {
          const std::string name = std::string(key.calibrate ? "calibrated" : "uncalibrated") +
                                   (key.merge ? "-merged" : "-unmerged");
          grouping.assignments.save(seed_dir / ("assignments-" + name + ".tsv"));
        }
      }
    }

    const MetricReport* baseline = nullptr;
    const std::size_t first_report = result.reports.size();
    for (auto v : plan) {
      const std::string name(to_string(v));
      log("seed " + std::to_string(seed) + ": train-rec " + name);
      start = Clock::now();
      MetricReport report;
      report.variant = v;
      report.seed = seed;
      const SocialContext* social = nullptr;
      const Grouping* grouping = nullptr;
      if (uses_social(v)) {
        const auto stages = ccm_stages(v);
        const StageKey key{stages.calibrate, stages.merge};
        social = &contexts.at(key);
        grouping = &groupings.at(key);
      }
      RecommenderModel model;
      run_stage("train-rec", [&] {
        model = init_recommender(dataset, social ? social->dim : 0, social ? social->relations : 0, config.rec,
                                 v, seed);
        auto trained = train_recommender(model, dataset, social, config.rec, seed);
        report.train_loss = std::move(trained.epoch_loss);
        report.validation_auc = std::move(trained.validation_auc);
        report.best_epoch = trained.best_epoch;
      });
      timing(seed, "train-rec " + name, start);

      start = Clock::now();
      run_stage("eval", [&] {
        const auto scores = score_examples(model, dataset, social, dataset.test);
        std::vector<int> labels;
        labels.reserve(dataset.test.size());
        for (const auto& ex : dataset.test) labels.push_back(ex.label);
        report.auc_full = auc(scores, labels);
        report.full_records = scores.size();
        std::vector<double> cold_scores;
        std::vector<int> cold_labels;
        for (auto i : prepared.cold_test) {
          cold_scores.push_back(scores[i]);
          cold_labels.push_back(labels[i]);
        }
        report.cold_records = cold_scores.size();
        report.auc_cold = cold_scores.empty() ? 0.0 : auc(cold_scores, cold_labels);
        if (grouping) {
          report.groups = grouping->assignments.group_count();
          if (truth) {
            const auto assigned = assignment_labels(graph, grouping->assignments);
            report.ari = adjusted_rand_index(*truth, assigned);
            report.nmi = normalized_mutual_information(*truth, assigned);
          }
        }
        if (options.write_artifacts) {
          recommender_checkpoint(model, config.rec, seed, social ? ccm_hash : "", social ? &graph : nullptr,
                                 social ? &ccm.table : nullptr)
              .save(seed_dir / ("rec-" + name + ".ckpt"));
          write_file(seed_dir / ("predictions-" + name + ".tsv"),
                     serialize_predictions(dataset.test_records, scores));
        }
      });
      timing(seed, "eval " + name, start);
      result.reports.push_back(std::move(report));
    }

    baseline = &result.reports[first_report];
    for (std::size_t i = first_report; i < result.reports.size(); ++i) {
      auto& r = result.reports[i];
      if (r.variant == Variant::kVanilla) continue;
      r.improvement_full = relative_improvement(r.auc_full, baseline->auc_full);
      if (baseline->auc_cold > 0.0) r.improvement_cold = relative_improvement(r.auc_cold, baseline->auc_cold);
    }
  }
  return result;
}

}  // namespace socialrec
