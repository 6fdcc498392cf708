#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "socialrec/ccm.hpp"
#include "socialrec/config.hpp"
#include "socialrec/interactions.hpp"
#include "socialrec/recommender.hpp"
#include "socialrec/social_graph.hpp"
#include "socialrec/synthetic.hpp"

namespace socialrec {

/// Inputs of a run, either generated or read from a world directory.
struct LoadedData {
  SocialGraph graph;
  InteractionLog log;
  ItemCatalog catalog;
  std::optional<GroundTruth> truth;
};

/// Reads the files named by WorldFiles::in(dir); ground truth is optional.
LoadedData load_data(const std::filesystem::path& dir, const RelationSchema& schema);
LoadedData generate_data(const WorldConfig& world, std::uint64_t seed);
/// generate_data when config.data_dir is empty, load_data otherwise.
LoadedData obtain_data(const ExperimentConfig& config, std::uint64_t seed);

struct PreparedData {
  LoadedData data;
  TemporalSplit split;
  ColdSplit cold;
  RecDataset dataset;
  std::vector<std::size_t> cold_test;  // indices into dataset.test of cold users' records
};

PreparedData prepare_data(LoadedData data, const ExperimentConfig& config);

/// Planted group per graph user index; throws DataError when truth misses a user.
std::vector<std::size_t> truth_labels(const SocialGraph& graph, const GroundTruth& truth);
/// Assigned group per graph user index.
std::vector<std::size_t> assignment_labels(const SocialGraph& graph, const GroupAssignmentTable& table);

/// One variant on one seed.
struct MetricReport {
  Variant variant = Variant::kVanilla;
  std::uint64_t seed = 0;
  double auc_full = 0.0;
  double auc_cold = 0.0;
  std::size_t full_records = 0;
  std::size_t cold_records = 0;
  std::optional<double> improvement_full;  // vs vanilla on the same seed
  std::optional<double> improvement_cold;
  std::optional<std::size_t> groups;
  std::optional<double> ari;
  std::optional<double> nmi;
  std::vector<double> train_loss;
  std::vector<double> validation_auc;
  std::size_t best_epoch = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// CCM diagnostics for one seed.
struct CcmSummary {
  std::uint64_t seed = 0;
  std::size_t cluster_population = 0;
  std::vector<double> cluster_loss;
  std::vector<double> calibrator_kl;
  double min_step_kl = 0.0;
  std::size_t holdout_users = 0;
  double student_agreement = 0.0;
  double teacher_masked_agreement = 0.0;
  std::size_t groups_before_merge = 0;
  std::size_t final_groups = 0;
  std::size_t min_group_size = 0;
  std::optional<double> ari;
  std::optional<double> nmi;

  friend bool operator==(const CcmSummary&, const CcmSummary&) = default;
};

struct BenchResult {
  std::string config_echo;
  std::vector<MetricReport> reports;  // seed-major, variants in requested order
  std::vector<CcmSummary> ccm;

  friend bool operator==(const BenchResult&, const BenchResult&) = default;
};

/// Per-variant means over seeds.
struct VariantSummary {
  Variant variant = Variant::kVanilla;
  double auc_full = 0.0;
  double auc_cold = 0.0;
  std::optional<double> improvement_full;  // of the mean AUCs
  std::optional<double> improvement_cold;
  double delta_cold_mean = 0.0;  // per-seed AUC_cold - vanilla AUC_cold
  double delta_cold_stddev = 0.0;
  std::optional<double> ari;
};
std::vector<VariantSummary> summarize(const BenchResult& result);

struct RunOptions {
  /// Writes checkpoints, assignments and predictions under out_dir/seed-<seed>/.
  bool write_artifacts = true;
  /// Progress lines; timing lines go to `timing` only.
  std::ostream* log = nullptr;
  std::ostream* timing = nullptr;
};

/// For each of config.repeats seeds (config.seed, config.seed + 1, ...): obtain data, train
/// CCM once if any variant needs it, then train and evaluate every variant in `variants`.
/// Vanilla is always evaluated so improvements have a baseline.
BenchResult run_experiment(const ExperimentConfig& config, std::span<const Variant> variants,
                           const RunOptions& options = {});

/// Runs `fn`, converting any non-config, non-data failure into StageError(stage, ...).
void run_stage(std::string_view stage, const std::function<void()>& fn);

// Rendering lives in report.cpp.

/// Table with one row per variant: FULL AUC, Imp.%, COLD AUC, Imp.%; baseline Imp.% is "-".
std::string render_table(const BenchResult& result);
std::string results_json(const BenchResult& result);
BenchResult parse_results_json(std::string_view text);

}  // namespace socialrec
