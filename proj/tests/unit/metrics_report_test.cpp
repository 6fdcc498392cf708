#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "socialrec/error.hpp"
#include "socialrec/experiment.hpp"
#include "socialrec/metrics.hpp"
#include "support.hpp"

namespace socialrec {
namespace {

double pairwise_auc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

TEST(Auc, KnownCases) {
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}), 0.0);
  EXPECT_EQ(auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, 0, 0, 1}), 0.5);
  EXPECT_THROW(auc(std::vector<double>{0.3, 0.4}, std::vector<int>{1, 1}), InvalidInput);
  EXPECT_THROW(auc(std::vector<double>{0.3}, std::vector<int>{1, 0}), InvalidInput);
}

TEST(Auc, MatchesPairwiseOracleWithTies) {
  Rng rng = make_rng(1, "test.auc");
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = uniform_int(rng, 2, 200);
    // Few distinct levels on most trials force heavy ties.
    const auto levels = trial % 3 == 0 ? 1000000 : uniform_int(rng, 1, 6);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(uniform_int(rng, 0, levels)) / static_cast<double>(levels);
      labels[i] = bernoulli(rng, 0.4) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    EXPECT_NEAR(auc(scores, labels), pairwise_auc(scores, labels), 1e-9);
  }
}

TEST(Auc, InvariantUnderIncreasingTransform) {
  Rng rng = make_rng(2, "test.auc");
  for (int trial = 0; trial < 100; ++trial) {
    auto scores = testing::random_vector(rng, 50);
    std::vector<int> labels(50);
    for (auto& l : labels) l = bernoulli(rng, 0.5) ? 1 : 0;
    labels[0] = 1;
    labels[1] = 0;
    std::vector<double> cubed;
    for (double s : scores) cubed.push_back(std::pow(s + 2.0, 3));
    EXPECT_EQ(auc(scores, labels), auc(cubed, labels));
  }
}

TEST(Ari, IdentityRelabelAndHandTable) {
  const std::vector<std::size_t> a{0, 0, 1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, a), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, std::vector<std::size_t>{5, 5, 3, 3, 9, 9}), 1.0);

  // Contingency of a = {0,0,0,1,1,1} vs b = {0,0,1,1,2,2}: rows [2,1,0] and [0,1,2].
  // sum C(n_ij,2) = 2, row pairs = 6, column pairs = 3, C(6,2) = 15.
  // expected = 6 * 3 / 15 = 1.2, max = (6 + 3) / 2 = 4.5, ARI = 0.8 / 3.3.
  const std::vector<std::size_t> x{0, 0, 0, 1, 1, 1};
  const std::vector<std::size_t> y{0, 0, 1, 1, 2, 2};
  EXPECT_NEAR(adjusted_rand_index(x, y), 0.8 / 3.3, 1e-12);
  EXPECT_NEAR(adjusted_rand_index(y, x), 0.8 / 3.3, 1e-12);
}

TEST(Ari, RandomRelabelingAveragesNearZero) {
  Rng rng = make_rng(3, "test.ari");
  std::vector<std::size_t> a(200);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = i % 5;
  double sum = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    auto b = a;
    std::shuffle(b.begin(), b.end(), rng);
    sum += adjusted_rand_index(a, b);
  }
  EXPECT_LT(std::abs(sum / 100.0), 0.05);
}

TEST(Ari, OneOnlyForIdenticalPartitions) {
  const std::vector<std::size_t> a{0, 0, 1, 1, 2, 2};
  const std::vector<std::size_t> b{0, 0, 1, 1, 2, 1};
  EXPECT_LT(adjusted_rand_index(a, b), 1.0);
}

TEST(Nmi, KnownCases) {
  const std::vector<std::size_t> a{0, 0, 1, 1, 2, 2};
  EXPECT_NEAR(normalized_mutual_information(a, std::vector<std::size_t>{4, 4, 7, 7, 1, 1}), 1.0, 1e-12);
  const std::vector<std::size_t> one(6, 0);
  EXPECT_EQ(normalized_mutual_information(one, one), 1.0);
  EXPECT_NEAR(normalized_mutual_information(std::vector<std::size_t>{0, 0, 1, 1},
                                            std::vector<std::size_t>{0, 1, 0, 1}),
              0.0, 1e-12);
}

TEST(Improvement, ReproducesPublishedPercentages) {
  EXPECT_EQ(format_percent(relative_improvement(0.770, 0.765)), "0.65%");
  EXPECT_EQ(format_percent(relative_improvement(0.746, 0.729)), "2.33%");
  EXPECT_EQ(format_percent(relative_improvement(0.5, 0.5)), "0.00%");
  EXPECT_EQ(format_percent(relative_improvement(0.49, 0.5)), "-2.00%");
}

BenchResult sample_result() {
  BenchResult result;
  result.config_echo = "seed = 1\n";
  for (std::uint64_t seed : {1, 2}) {
    MetricReport vanilla;
    vanilla.variant = Variant::kVanilla;
    vanilla.seed = seed;
    vanilla.auc_full = 0.765;
    vanilla.auc_cold = 0.729;
    vanilla.full_records = 100;
    vanilla.cold_records = 40;
    vanilla.train_loss = {0.7, 0.6};
    vanilla.validation_auc = {0.61, 0.63};
    vanilla.best_epoch = 2;
    MetricReport social = vanilla;
    social.variant = Variant::kSocial;
    social.auc_full = 0.770;
    social.auc_cold = seed == 1 ? 0.746 : 0.740;
    social.improvement_full = relative_improvement(social.auc_full, vanilla.auc_full);
    social.improvement_cold = relative_improvement(social.auc_cold, vanilla.auc_cold);
    social.groups = 8;
    social.ari = 0.93;
    social.nmi = 0.9;
    result.reports.push_back(vanilla);
    result.reports.push_back(social);
    CcmSummary c;
    c.seed = seed;
    c.cluster_population = 250;
    c.cluster_loss = {1.0, 0.5};
    c.calibrator_kl = {0.2, 0.05};
    c.final_groups = 8;
    c.ari = 0.93;
    result.ccm.push_back(c);
  }
  return result;
}

TEST(Report, BaselineRowShowsDash) {
  BenchResult result;
  MetricReport vanilla;
  vanilla.auc_full = 0.6;
  vanilla.auc_cold = 0.55;
  result.reports.push_back(vanilla);
  const auto table = render_table(result);
  const auto line_end = table.find('\n', table.find("vanilla"));
  const auto row = table.substr(table.find("vanilla"), line_end - table.find("vanilla"));
  EXPECT_NE(row.find(" - "), std::string::npos) << row;
  EXPECT_EQ(row.find('%'), std::string::npos) << row;
}

TEST(Report, SummaryAndRendering) {
  const auto result = sample_result();
  const auto summary = summarize(result);
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[1].variant, Variant::kSocial);
  EXPECT_NEAR(summary[1].auc_cold, 0.743, 1e-12);
  EXPECT_NEAR(summary[1].delta_cold_mean, 0.014, 1e-12);
  EXPECT_NEAR(summary[1].delta_cold_stddev, std::sqrt(2.0) * 0.003, 1e-12);
  EXPECT_EQ(format_percent(*summary[1].improvement_full), "0.65%");
  const auto table = render_table(result);
  EXPECT_NE(table.find("0.65%"), std::string::npos);
  EXPECT_NE(table.find("0.7700"), std::string::npos);
}

TEST(Report, JsonRoundTrips) {
  const auto result = sample_result();
  const auto text = results_json(result);
  const auto parsed = parse_results_json(text);
  EXPECT_EQ(parsed, result);
  EXPECT_EQ(results_json(parsed), text);
  EXPECT_THROW(parse_results_json("{"), DataError);
  EXPECT_THROW(parse_results_json("{\"format_version\": 2}"), DataError);
}

}  // namespace
}  // namespace socialrec
