// socialrec: world generation, CCM grouping, recommender training and evaluation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "socialrec/ccm.hpp"
#include "socialrec/checkpoint.hpp"
#include "socialrec/config.hpp"
#include "socialrec/error.hpp"
#include "socialrec/experiment.hpp"
#include "socialrec/metrics.hpp"
#include "socialrec/recommender.hpp"
#include "socialrec/synthetic.hpp"

namespace fs = std::filesystem;
using namespace socialrec;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitStage = 4;

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> cold_threshold;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> ccm;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value config file");
  cmd->add_option("--seed", flags.seed, "root seed");
  cmd->add_option("--variant", flags.variant, "vanilla|social|social-avg|no-calibrator|no-merge");
  cmd->add_option("--cold-threshold", flags.cold_threshold, "max training events of a cold user");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--data", flags.data, "directory holding social.tsv, interactions.tsv, items.tsv");
  cmd->add_option("--set", flags.overrides, "extra key=value override (repeatable)");
}

ExperimentConfig effective_config(const Flags& flags) {
  ExperimentConfig config = flags.config_path.empty() ? ExperimentConfig{} : load_config(flags.config_path);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed) config.seed = *flags.seed;
  if (flags.variant) config.variant = parse_variant(*flags.variant);
  if (flags.cold_threshold) config.cold_threshold = *flags.cold_threshold;
  if (flags.out) config.out_dir = *flags.out;
  if (flags.data) config.data_dir = *flags.data;
  config.validate();
  return config;
}

/// Stage commands read their inputs from --data, falling back to the output directory.
fs::path data_dir(const ExperimentConfig& config) {
  return config.data_dir.empty() ? fs::path(config.out_dir) : fs::path(config.data_dir);
}

void echo_config(const ExperimentConfig& config) {
  write_file(fs::path(config.out_dir) / "config.txt", config.echo());
}

LoadedData load_inputs(const ExperimentConfig& config) {
  return load_data(data_dir(config), RelationSchema(config.world.relations));
}

std::string stage_name(const CcmStages& stages) {
  return std::string(stages.calibrate ? "calibrated" : "uncalibrated") + (stages.merge ? "-merged" : "-unmerged");
}

int cmd_gen(const ExperimentConfig& config) {
  LoadedData data;
  run_stage("gen", [&] {
    auto world = config.world;
    world.seed = config.seed;
    auto w = generate_world(world);
    write_world(w, WorldFiles::in(config.out_dir));
    data.graph = std::move(w.graph);
    data.log = std::move(w.log);
  });
  echo_config(config);
  std::cout << "users " << data.graph.user_count() << ", interactions " << data.log.size() << ", written to "
            << config.out_dir << "\n";
  return 0;
}

int cmd_train_ccm(const ExperimentConfig& config, const Flags& flags) {
  const auto data = load_inputs(config);
  const auto stages = ccm_stages(config.variant);
  CcmModel model;
  Grouping grouping;
  run_stage("train-ccm", [&] { model = train_ccm(data.graph, config.ccm, config.seed, stages.calibrate); });
  run_stage("assign", [&] { grouping = group_users(data.graph, model, stages); });
  const fs::path out = config.out_dir;
  const fs::path ckpt_path = flags.ccm ? fs::path(*flags.ccm) : out / "ccm.ckpt";
  ccm_checkpoint(data.graph, model, grouping).save(ckpt_path);
  grouping.assignments.save(out / "assignments.tsv");
  echo_config(config);

  std::cout << "stages " << stage_name(stages) << ", groups " << grouping.groups_before_merge << " -> "
            << grouping.assignments.group_count() << "\n";
  if (model.calibrator) {
    std::cout << "calibrator agreement: student " << model.calibrator->student_agreement << ", teacher on masked "
              << model.calibrator->teacher_masked_agreement << "\n";
  }
  if (data.truth) {
    const auto truth = truth_labels(data.graph, *data.truth);
    const auto assigned = assignment_labels(data.graph, grouping.assignments);
    std::cout << "ARI " << adjusted_rand_index(truth, assigned) << ", NMI "
              << normalized_mutual_information(truth, assigned) << "\n";
  }
  return 0;
}

int cmd_assign(const ExperimentConfig& config, const Flags& flags) {
  const auto data = load_inputs(config);
  const fs::path out = config.out_dir;
  const auto ckpt = Checkpoint::load(flags.ccm ? fs::path(*flags.ccm) : out / "ccm.ckpt");
  GroupAssignmentTable table;
  run_stage("assign", [&] {
    const auto assigner = load_ccm_assigner(ckpt, data.graph);
    table = final_assignment(data.graph, assigner.table, assigner.net, assigner.prototypes);
  });
  table.save(out / "assignments.tsv");
  echo_config(config);
  std::cout << "assigned " << table.size() << " users to " << table.group_count() << " groups\n";
  return 0;
}

struct SocialInputs {
  GroupAssignmentTable assignments;
  EntityEmbeddingTable table;
  std::string ccm_hash;
};

SocialInputs load_social_inputs(const ExperimentConfig& config, const Flags& flags, const SocialGraph& graph) {
  const fs::path out = config.out_dir;
  const fs::path ckpt_path = flags.ccm ? fs::path(*flags.ccm) : out / "ccm.ckpt";
  if (!fs::exists(ckpt_path) || !fs::exists(out / "assignments.tsv")) {
    throw DataError("social variant needs " + ckpt_path.string() + " and " + (out / "assignments.tsv").string() +
                    " (run train-ccm first)");
  }
  SocialInputs in;
  in.assignments = GroupAssignmentTable::load(out / "assignments.tsv");
  in.table = load_entity_table(Checkpoint::load(ckpt_path), graph);
  in.ccm_hash = hex64(file_hash(ckpt_path));
  return in;
}

int cmd_train_rec(const ExperimentConfig& config, const Flags& flags) {
  auto prepared = prepare_data(load_inputs(config), config);
  const auto variant = config.variant;
  const std::string name(to_string(variant));
  std::optional<SocialInputs> social_in;
  SocialContext social;
  if (uses_social(variant)) {
    social_in = load_social_inputs(config, flags, prepared.data.graph);
    run_stage("train-rec", [&] {
      social = build_social_context(prepared.data.graph, social_in->table, social_in->assignments,
                                    prepared.dataset.users);
    });
  }
  RecommenderModel model;
  TrainReport report;
  run_stage("train-rec", [&] {
    model = init_recommender(prepared.dataset, social.dim, social.relations, config.rec, variant, config.seed);
    report = train_recommender(model, prepared.dataset, social_in ? &social : nullptr, config.rec, config.seed);
  });
  recommender_checkpoint(model, config.rec, config.seed, social_in ? social_in->ccm_hash : "",
                         social_in ? &prepared.data.graph : nullptr, social_in ? &social_in->table : nullptr)
      .save(fs::path(config.out_dir) / ("rec-" + name + ".ckpt"));
  echo_config(config);
  std::cout << "variant " << name << ", epoch loss";
  for (auto l : report.epoch_loss) std::cout << ' ' << l;
  if (!report.validation_auc.empty()) {
    std::cout << ", validation AUC";
    for (auto a : report.validation_auc) std::cout << ' ' << a;
  }
  std::cout << ", kept epoch " << report.best_epoch << "\n";
  return 0;
}

int cmd_eval(const ExperimentConfig& config) {
  auto prepared = prepare_data(load_inputs(config), config);
  const std::string name(to_string(config.variant));
  const fs::path out = config.out_dir;
  const auto ckpt_path = out / ("rec-" + name + ".ckpt");
  if (!fs::exists(ckpt_path)) throw DataError("missing " + ckpt_path.string() + " (run train-rec first)");
  const auto ckpt = Checkpoint::load(ckpt_path);
  const auto model = load_recommender(ckpt);
  if (model.users != prepared.dataset.users || model.items != prepared.dataset.items) {
    throw DataError("checkpoint " + ckpt_path.string() + " was trained on different users or items");
  }

  SocialContext social;
  std::optional<GroupAssignmentTable> assignments;
  if (uses_social(model.variant)) {
    if (!fs::exists(out / "assignments.tsv")) throw DataError("missing " + (out / "assignments.tsv").string());
    assignments = GroupAssignmentTable::load(out / "assignments.tsv");
    const auto table = load_entity_table(ckpt, prepared.data.graph);
    run_stage("eval", [&] {
      social = build_social_context(prepared.data.graph, table, *assignments, prepared.dataset.users);
    });
  }

  BenchResult result;
  result.config_echo = config.echo();
  MetricReport report;
  report.variant = model.variant;
  report.seed = config.seed;
  run_stage("eval", [&] {
    const auto& ds = prepared.dataset;
    const auto scores = score_examples(model, ds, assignments ? &social : nullptr, ds.test);
    std::vector<int> labels;
    for (const auto& ex : ds.test) labels.push_back(ex.label);
    report.auc_full = auc(scores, labels);
    report.full_records = scores.size();
    std::vector<double> cold_scores;
    std::vector<int> cold_labels;
    for (auto i : prepared.cold_test) {
      cold_scores.push_back(scores[i]);
      cold_labels.push_back(labels[i]);
    }
    report.cold_records = cold_scores.size();
    if (!cold_scores.empty()) report.auc_cold = auc(cold_scores, cold_labels);
    if (assignments) {
      report.groups = assignments->group_count();
      if (prepared.data.truth) {
        const auto truth = truth_labels(prepared.data.graph, *prepared.data.truth);
        const auto assigned = assignment_labels(prepared.data.graph, *assignments);
        report.ari = adjusted_rand_index(truth, assigned);
        report.nmi = normalized_mutual_information(truth, assigned);
      }
    }
    write_file(out / ("predictions-" + name + ".tsv"), serialize_predictions(ds.test_records, scores));
  });
  result.reports.push_back(report);
  const auto table = render_table(result);
  write_file(out / ("report-" + name + ".txt"), table);
  write_file(out / ("results-" + name + ".json"), results_json(result));
  echo_config(config);
  std::cout << table;
  return 0;
}

int cmd_bench(const ExperimentConfig& config) {
  const fs::path out = config.out_dir;
  fs::create_directories(out);
  std::ofstream timing(out / "timing.tsv");
  timing << "seed\tstage\tseconds\n";
  RunOptions options;
  options.log = &std::cerr;
  options.timing = &timing;
  const auto result = run_experiment(config, config.variants, options);
  const auto table = render_table(result);
  write_file(out / "report.txt", table);
  write_file(out / "results.json", results_json(result));
  echo_config(config);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Social-graph enhanced recommendation with interest-group discovery"};
  app.require_subcommand(1);
  Flags flags;
  auto* gen = app.add_subcommand("gen", "generate a synthetic world");
  auto* train_ccm_cmd = app.add_subcommand("train-ccm", "train the cluster/calibrate/merge grouping");
  auto* assign = app.add_subcommand("assign", "assign users to groups from a CCM checkpoint");
  auto* train_rec = app.add_subcommand("train-rec", "train one recommender variant");
  auto* eval = app.add_subcommand("eval", "score the test split with a trained recommender");
  auto* bench = app.add_subcommand("bench", "full sweep: every variant over every seed");
  for (auto* cmd : {gen, train_ccm_cmd, assign, train_rec, eval, bench}) add_common(cmd, flags);
  for (auto* cmd : {train_ccm_cmd, assign, train_rec}) {
    cmd->add_option("--ccm", flags.ccm, "CCM checkpoint path (default <out>/ccm.ckpt)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const auto config = effective_config(flags);
    if (gen->parsed()) return cmd_gen(config);
    if (train_ccm_cmd->parsed()) return cmd_train_ccm(config, flags);
    if (assign->parsed()) return cmd_assign(config, flags);
    if (train_rec->parsed()) return cmd_train_rec(config, flags);
    if (eval->parsed()) return cmd_eval(config);
    if (bench->parsed()) return cmd_bench(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const StageError& e) {
    std::cerr << "stage '" << e.stage() << "' failed: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
