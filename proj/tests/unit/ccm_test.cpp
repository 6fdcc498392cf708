#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "socialrec/ccm.hpp"
#include "socialrec/error.hpp"
#include "socialrec/losses.hpp"
#include "socialrec/metrics.hpp"
#include "support.hpp"

namespace socialrec {
namespace {

using testing::random_tensor;
using testing::random_vector;

std::size_t brute_force_nearest(const Tensor2& w, std::span<const double> z) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < w.rows(); ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) d += (w(j, i) - z[i]) * (w(j, i) - z[i]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

TEST(AssignGroup, KnownCases) {
  EXPECT_EQ(assign_group(Tensor2(1, 2, {5, 5}), std::vector<double>{-3, 8}), 0u);
  EXPECT_EQ(assign_group(Tensor2(2, 2, {0, 0, 1, 1}), std::vector<double>{0.9, 0.8}), 1u);
  EXPECT_EQ(assign_group(Tensor2(2, 2, {0, 0, 2, 0}), std::vector<double>{1, 0}), 0u);
  EXPECT_THROW(assign_group(Tensor2(2, 3), std::vector<double>{1, 0}), InvalidInput);
}

TEST(AssignGroup, MatchesExhaustiveScan) {
  Rng rng = make_rng(1, "test.assign");
  for (int i = 0; i < 1000; ++i) {
    const auto m = uniform_int(rng, 1, 12);
    const auto d = uniform_int(rng, 1, 6);
    // Coarse grid values make exact distance ties common.
    auto w = random_tensor(rng, m, d, -2.0, 2.0);
    for (auto& v : w.values()) v = std::round(v * 2.0) / 2.0;
    auto z = random_vector(rng, d, -2.0, 2.0);
    for (auto& v : z) v = std::round(v * 2.0) / 2.0;
    EXPECT_EQ(assign_group(w, z), brute_force_nearest(w, z));
  }
}

TEST(PrototypeUpdate, PullRules) {
  Tensor2 w(2, 2, {0, 0, 7, 7});
  prototype_update(w, 0, std::vector<double>{2, 4}, 0.5);
  EXPECT_EQ(w, Tensor2(2, 2, {1, 2, 7, 7}));
  prototype_update(w, 1, std::vector<double>{-1, 3}, 1.0);
  EXPECT_EQ(w, Tensor2(2, 2, {1, 2, -1, 3}));
  prototype_update(w, 1, std::vector<double>{100, 100}, 0.0);
  EXPECT_EQ(w, Tensor2(2, 2, {1, 2, -1, 3}));
  EXPECT_THROW(prototype_update(w, 0, std::vector<double>{0, 0}, 1.5), InvalidInput);
}

TEST(AssignmentDistribution, DegenerateAndSymmetricCases) {
  Rng rng = make_rng(2, "test.dist");
  const auto net = make_projection_net(3, 5, rng);
  EXPECT_EQ(assignment_distribution(net, Tensor2(1, 3, 0.3), std::vector<double>{1, 2, 3}, 1.0),
            (std::vector<double>{1.0}));

  // Four prototypes at equal distance from z.
  const std::vector<double> z{0.5, -0.5};
  const Tensor2 w(4, 2, {1.5, -0.5, -0.5, -0.5, 0.5, 0.5, 0.5, -1.5});
  for (double p : group_distribution(w, z, 0.7)) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(AssignmentDistribution, ArgmaxAgreesWithAssignGroup) {
  Rng rng = make_rng(3, "test.dist");
  for (int i = 0; i < 100; ++i) {
    const auto dim = uniform_int(rng, 2, 6);
    const auto net = make_projection_net(dim, 8, rng);
    const auto w = random_tensor(rng, uniform_int(rng, 1, 10), dim);
    const auto x = random_vector(rng, dim);
    const auto p = assignment_distribution(net, w, x, 0.5 + uniform01(rng));
    const auto argmax = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    EXPECT_EQ(argmax, assign_group(w, forward(net, x)));
  }
}

TEST(CalibrationLoss, NonNegativeAndZeroOnItsOwnTarget) {
  Rng rng = make_rng(4, "test.calib");
  for (int i = 0; i < 200; ++i) {
    const auto w = random_tensor(rng, 5, 3);
    const auto z = random_vector(rng, 3);
    const auto target = testing::random_simplex(rng, 5);
    EXPECT_GE(calibration_loss(target, w, z, 1.0).kl, 0.0);
    const auto self = group_distribution(w, z, 0.8);
    EXPECT_EQ(calibration_loss(self, w, z, 0.8).kl, 0.0);
  }
}

TEST(CalibrationLoss, GradientMatchesFiniteDifferences) {
  Rng rng = make_rng(5, "test.calib.fd");
  for (int i = 0; i < 50; ++i) {
    const auto w = random_tensor(rng, 4, 3);
    auto z = random_vector(rng, 3);
    const auto target = testing::random_simplex(rng, 4);
    const double tau = 0.5 + uniform01(rng);
    const auto analytic = calibration_loss(target, w, z, tau).d_z;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double numeric =
          testing::central_difference(z[k], [&] { return calibration_loss(target, w, z, tau).kl; });
      EXPECT_LT(testing::relative_error(analytic[k], numeric), testing::kFdTolerance);
    }
  }
}

TEST(AutoMinGroupSize, FloorAndScale) {
  EXPECT_EQ(auto_min_group_size(10, 4), 5u);
  EXPECT_EQ(auto_min_group_size(2000, 8), 62u);
  EXPECT_EQ(auto_min_group_size(2000, 0), 500u);
}

// Users with one private entity each in a single relation; the table rows are planted
// Gaussian clusters, so X-space itself holds the clusters.
struct PlantedClusters {
  SocialGraph graph;
  EntityEmbeddingTable table;
  std::vector<std::size_t> truth;
};

PlantedClusters planted_clusters(std::uint64_t seed, std::size_t per_cluster) {
  PlantedClusters out;
  std::vector<SocialRecord> records;
  const std::size_t dim = 4;
  Tensor2 rows(3 * per_cluster, dim);
  Rng rng = make_rng(seed, "test.planted");
  std::normal_distribution<double> noise(0.0, 0.2);
  for (std::size_t u = 0; u < 3 * per_cluster; ++u) {
    const std::size_t c = u % 3;
    records.push_back({u, 0, u});
    for (std::size_t i = 0; i < dim; ++i) rows(u, i) = (i == c ? 3.0 : 0.0) + noise(rng);
    out.truth.push_back(c);
  }
  out.graph = SocialGraph(RelationSchema({"only"}), records);
  out.table = EntityEmbeddingTable({rows});
  return out;
}

Tensor2 mean_init(const SocialGraph& graph, const EntityEmbeddingTable& table, const DenseNet& net,
                  std::size_t groups, Rng& rng) {
  const auto x = social_embeddings(graph, table);
  std::vector<double> mean(net.output_dim(), 0.0);
  for (std::size_t u = 0; u < x.rows(); ++u) axpy(1.0 / static_cast<double>(x.rows()), forward(net, x.row(u)), mean);
  Tensor2 w(groups, net.output_dim());
  std::normal_distribution<double> noise(0.0, 0.01);
  for (std::size_t j = 0; j < groups; ++j) {
    for (std::size_t i = 0; i < w.cols(); ++i) w(j, i) = mean[i] + noise(rng);
  }
  return w;
}

TEST(ClusterLayer, ZeroEpochsChangeNothing) {
  auto p = planted_clusters(1, 10);
  Rng rng = make_rng(1, "test.cluster");
  auto net = make_projection_net(4, 8, rng);
  auto w = mean_init(p.graph, p.table, net, 3, rng);
  const auto net0 = net;
  const auto w0 = w;
  const auto table0 = p.table;
  CcmConfig config;
  config.groups = 3;
  config.cluster_epochs = 0;
  config.cluster_net_learning_rate = 1e-3;
  const auto report = train_cluster_layer(p.graph, p.table, net, w, config, rng);
  EXPECT_TRUE(report.epoch_loss.empty());
  EXPECT_EQ(net, net0);
  EXPECT_EQ(w, w0);
  EXPECT_EQ(p.table, table0);
}

TEST(ClusterLayer, RecoversPlantedGaussianClusters) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto p = planted_clusters(seed, 40);
    Rng rng = make_rng(seed, "test.cluster");
    auto net = make_projection_net(4, 8, rng);
    auto w = mean_init(p.graph, p.table, net, 3, rng);
    CcmConfig config;
    config.groups = 3;
    config.cluster_population = ClusterPopulation::kAllUsers;
    const auto report = train_cluster_layer(p.graph, p.table, net, w, config, rng);

    // Loss over the last half of training does not rise by more than 5%.
    const std::size_t half = report.epoch_loss.size() / 2;
    for (std::size_t e = half + 1; e < report.epoch_loss.size(); ++e) {
      EXPECT_LE(report.epoch_loss[e], report.epoch_loss[e - 1] * 1.05) << "seed " << seed << " epoch " << e;
    }
    const auto assigned = final_assignment(p.graph, p.table, net, w);
    EXPECT_GE(adjusted_rand_index(p.truth, assigned.groups()), 0.9) << "seed " << seed;
  }
}

TEST(ClusterLayer, RejectsMoreGroupsThanUsers) {
  auto p = planted_clusters(1, 1);
  Rng rng = make_rng(1, "test.cluster");
  auto net = make_projection_net(4, 8, rng);
  Tensor2 w(5, 4);
  CcmConfig config;
  config.groups = 5;
  EXPECT_THROW(train_cluster_layer(p.graph, p.table, net, w, config, rng), ConfigError);
}

SocialGraph full_relation_graph(std::uint64_t seed) {
  auto world = testing::small_world(seed);
  world.presence = 1.0;
  return generate_world(world).graph;
}

TEST(Calibrator, ClonedStudentWithoutMaskingStaysPut) {
  const auto graph = full_relation_graph(2);
  Rng rng = make_rng(2, "test.calibrator");
  CcmConfig config;
  config.groups = 4;
  config.relation_dim = 4;
  config.hidden = 8;
  config.mask_fraction = 0.0;
  config.calibrator_epochs = 3;
  const std::vector<std::size_t> dims(graph.relation_count(), config.relation_dim);
  const auto table = EntityEmbeddingTable::random(graph, dims, 0.5, rng);
  const auto teacher = make_projection_net(table.layout().total(), config.hidden, rng);
  const auto prototypes = random_tensor(rng, 4, table.layout().total());
  auto student = teacher;
  Rng eval_rng = make_rng(2, "test.calibrator.eval");
  const auto report = train_calibrator(graph, table, teacher, prototypes, student, config, rng, eval_rng);
  ASSERT_EQ(report.epoch_kl.size(), 3u);
  for (double kl : report.epoch_kl) EXPECT_EQ(kl, 0.0);
  EXPECT_EQ(report.min_step_kl, 0.0);
  EXPECT_EQ(student, teacher);
  EXPECT_EQ(report.student_agreement, 1.0);
}

TEST(Calibrator, LossIsNonNegativeWithMasking) {
  const auto graph = full_relation_graph(3);
  Rng rng = make_rng(3, "test.calibrator");
  CcmConfig config;
  config.groups = 4;
  config.relation_dim = 4;
  config.hidden = 8;
  config.calibrator_epochs = 5;
  const std::vector<std::size_t> dims(graph.relation_count(), config.relation_dim);
  const auto table = EntityEmbeddingTable::random(graph, dims, 0.5, rng);
  const auto teacher = make_projection_net(table.layout().total(), config.hidden, rng);
  const auto prototypes = random_tensor(rng, 4, table.layout().total(), -0.3, 0.3);
  auto student = teacher;
  Rng eval_rng = make_rng(3, "test.calibrator.eval");
  const auto report = train_calibrator(graph, table, teacher, prototypes, student, config, rng, eval_rng);
  EXPECT_GE(report.min_step_kl, 0.0);
  for (double kl : report.epoch_kl) EXPECT_GE(kl, 0.0);
  EXPECT_FALSE(report.holdout_users.empty());
  std::set<std::size_t> train(report.train_users.begin(), report.train_users.end());
  for (auto u : report.holdout_users) EXPECT_EQ(train.count(u), 0u);
}

std::vector<std::size_t> sizes_of(std::span<const std::size_t> assignment, std::size_t groups) {
  std::vector<std::size_t> sizes(groups, 0);
  for (auto g : assignment) ++sizes.at(g);
  return sizes;
}

struct MergeCase {
  std::vector<std::size_t> assignment;
  Tensor2 prototypes;
  Tensor2 projected;
};

MergeCase random_merge_case(Rng& rng, std::vector<std::size_t> sizes, std::size_t dim) {
  MergeCase c;
  c.prototypes = random_tensor(rng, sizes.size(), dim, -3.0, 3.0);
  std::vector<std::vector<double>> rows;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    for (std::size_t k = 0; k < sizes[g]; ++k) {
      c.assignment.push_back(g);
      auto z = random_vector(rng, dim, -0.3, 0.3);
      axpy(1.0, c.prototypes.row(g), z);
      rows.push_back(z);
    }
  }
  c.projected = Tensor2(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), c.projected.row(i).begin());
  return c;
}

TEST(Merge, LargeGroupsAreAFixedPoint) {
  Rng rng = make_rng(6, "test.merge");
  // Group 2 is empty, so ids are re-densified.
  auto c = random_merge_case(rng, {7, 9, 0, 6}, 3);
  const auto result = merge_small_groups(c.assignment, c.prototypes, c.projected, 5);
  const std::vector<std::size_t> remap{0, 1, 0, 2};
  ASSERT_EQ(result.assignment.size(), c.assignment.size());
  for (std::size_t i = 0; i < c.assignment.size(); ++i) EXPECT_EQ(result.assignment[i], remap[c.assignment[i]]);
  EXPECT_EQ(result.prototypes.rows(), 3u);
  EXPECT_EQ(result.min_group_size, 5u);
}

TEST(Merge, SmallGroupJoinsTheLargeOne) {
  Rng rng = make_rng(7, "test.merge");
  auto c = random_merge_case(rng, {100, 2}, 2);
  for (bool recompute : {false, true}) {
    const auto result = merge_small_groups(c.assignment, c.prototypes, c.projected, 5, recompute);
    EXPECT_EQ(result.prototypes.rows(), 1u);
    EXPECT_EQ(sizes_of(result.assignment, 1), (std::vector<std::size_t>{102}));
  }
}

TEST(Merge, GuaranteeHoldsOnRandomConfigurations) {
  Rng rng = make_rng(8, "test.merge");
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = uniform_int(rng, 1, 12);
    const bool all_tiny = trial % 4 == 0;
    std::vector<std::size_t> sizes(m);
    for (auto& s : sizes) s = all_tiny ? uniform_int(rng, 0, 3) : uniform_int(rng, 0, 40);
    if (std::all_of(sizes.begin(), sizes.end(), [](auto s) { return s == 0; })) sizes[0] = 1;
    auto c = random_merge_case(rng, sizes, 3);
    const std::size_t users = c.assignment.size();
    const std::size_t threshold = trial % 3 == 0 ? 0 : uniform_int(rng, 1, std::min<std::size_t>(25, users));
    const auto result =
        merge_small_groups(c.assignment, c.prototypes, c.projected, threshold, trial % 2 == 0);
    const auto groups = result.prototypes.rows();
    const auto merged = sizes_of(result.assignment, groups);
    std::size_t total = 0;
    for (auto s : merged) {
      total += s;
      EXPECT_TRUE(s >= result.min_group_size || groups == 1) << "trial " << trial;
      EXPECT_GT(s, 0u);
    }
    EXPECT_EQ(total, c.assignment.size());
    if (threshold > 0) EXPECT_EQ(result.min_group_size, threshold);
  }
}

TEST(Merge, RejectsThresholdAboveUserCount) {
  Rng rng = make_rng(11, "test.merge");
  auto c = random_merge_case(rng, {3, 2}, 2);
  EXPECT_THROW(merge_small_groups(c.assignment, c.prototypes, c.projected, 6), ConfigError);
}

TEST(FinalAssignment, SingleUserLandsInGroupZero) {
  const auto graph = parse_social_text("42\tstar\t1\n", RelationSchema({"star"}));
  Rng rng = make_rng(9, "test.final");
  const std::size_t dims[] = {3};
  const auto table = EntityEmbeddingTable::random(graph, dims, 1.0, rng);
  const auto net = make_projection_net(3, 4, rng);
  const auto result = final_assignment(graph, table, net, random_tensor(rng, 5, 3));
  EXPECT_EQ(result.users(), (std::vector<UserId>{42}));
  EXPECT_EQ(result.groups(), (std::vector<std::size_t>{0}));
  EXPECT_EQ(result.group_count(), 1u);
}

TEST(FinalAssignment, EqualsBruteForceNearestAndPartitions) {
  Rng rng = make_rng(10, "test.final");
  const auto graph = testing::random_graph(rng, 60, 3, 9);
  const std::vector<std::size_t> dims{3, 3, 3};
  const auto table = EntityEmbeddingTable::random(graph, dims, 1.0, rng);
  const auto net = make_projection_net(9, 8, rng);
  const auto w = random_tensor(rng, 6, 9, -0.5, 0.5);
  Tensor2 used;
  const auto result = final_assignment(graph, table, net, w, &used);
  std::size_t total = 0;
  for (auto s : result.sizes()) total += s;
  EXPECT_EQ(total, graph.user_count());
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    const auto z = forward(net, social_embedding(graph, table, u));
    EXPECT_EQ(result.groups()[u], brute_force_nearest(used, z));
    const auto original = brute_force_nearest(w, z);
    const auto dense = result.groups()[u];
    EXPECT_TRUE(std::equal(used.row(dense).begin(), used.row(dense).end(), w.row(original).begin()));
  }
}

TEST(GroupAssignmentTable, RoundTripsAndRejectsBadInput) {
  const GroupAssignmentTable table({3, 5, 9}, {1, 0, 1});
  EXPECT_EQ(GroupAssignmentTable::parse(table.serialize()), table);
  EXPECT_EQ(table.group_of(5), 0u);
  EXPECT_FALSE(table.group_of(4).has_value());
  EXPECT_THROW(GroupAssignmentTable::parse("3\tx\n"), DataError);
}

TEST(Ccm, PipelineIsDeterministicAndCheckpointReassigns) {
  const auto world = generate_world(testing::small_world(4));
  CcmConfig config;
  config.groups = 8;
  config.relation_dim = 4;
  config.hidden = 16;
  config.cluster_epochs = 5;
  config.calibrator_epochs = 3;
  const auto a = train_ccm(world.graph, config, 4);
  const auto b = train_ccm(world.graph, config, 4);
  const auto ga = group_users(world.graph, a, {});
  const auto gb = group_users(world.graph, b, {});
  EXPECT_EQ(ga.assignments.serialize(), gb.assignments.serialize());
  const auto ckpt = ccm_checkpoint(world.graph, a, ga);
  EXPECT_EQ(ckpt.serialize(), ccm_checkpoint(world.graph, b, gb).serialize());

  const auto assigner = load_ccm_assigner(Checkpoint::parse(ckpt.serialize()), world.graph);
  EXPECT_EQ(assigner.table, a.table);
  const auto again = final_assignment(world.graph, assigner.table, assigner.net, assigner.prototypes);
  EXPECT_EQ(again, ga.assignments);
}

TEST(Ccm, StageTogglesShapeTheGrouping) {
  const auto world = generate_world(testing::small_world(5));
  CcmConfig config;
  config.groups = 8;
  config.relation_dim = 4;
  config.hidden = 16;
  config.cluster_epochs = 5;
  config.calibrator_epochs = 2;
  const auto without = train_ccm(world.graph, config, 5, false);
  EXPECT_FALSE(without.has_student);
  EXPECT_FALSE(without.calibrator.has_value());
  const auto unmerged = group_users(world.graph, without, CcmStages{false, false});
  EXPECT_EQ(unmerged.min_group_size, 0u);
  EXPECT_EQ(unmerged.assignments.group_count(), unmerged.groups_before_merge);
  const auto merged = group_users(world.graph, without, CcmStages{false, true});
  for (auto s : merged.assignments.sizes()) {
    EXPECT_TRUE(s >= merged.min_group_size || merged.assignments.group_count() == 1);
  }
}

}  // namespace
}  // namespace socialrec
