#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "socialrec/error.hpp"
#include "socialrec/interactions.hpp"
#include "socialrec/synthetic.hpp"
#include "support.hpp"

namespace socialrec {
namespace {

std::map<UserId, std::size_t> truth_map(const World& w) {
  return {w.truth.user_groups.begin(), w.truth.user_groups.end()};
}

TEST(Generator, NoLeakFullPresenceSeparatesGroups) {
  auto config = testing::small_world(1);
  config.leak = 0.0;
  config.presence = 1.0;
  const auto w = generate_world(config);
  const auto truth = truth_map(w);
  const auto& g = w.graph;
  for (std::size_t u = 0; u < g.user_count(); ++u) {
    EXPECT_TRUE(g.has_all_relations(u));
    for (RelationId l = 0; l < g.relation_count(); ++l) {
      const auto mates = neighbors(g, u, l);
      const std::set<std::size_t> mate_set(mates.begin(), mates.end());
      for (std::size_t v = 0; v < g.user_count(); ++v) {
        if (v == u) continue;
        const bool same = truth.at(g.users()[u]) == truth.at(g.users()[v]);
        // One pool entity per group and relation: same-group users always share it.
        EXPECT_EQ(mate_set.count(v) == 1, same) << u << " " << v << " " << l;
      }
    }
  }
}

TEST(Generator, LabelNoiseFlipsHalfTheLabels) {
  auto config = testing::small_world(2);
  config.users_per_group = 100;
  const auto clean = generate_world(config);
  config.label_noise = 0.5;
  const auto noisy = generate_world(config);
  ASSERT_EQ(clean.log.size(), noisy.log.size());
  ASSERT_GE(clean.log.size(), 10000u);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < clean.log.size(); ++i) {
    ASSERT_EQ(clean.log[i].item, noisy.log[i].item);
    flips += clean.log[i].label != noisy.log[i].label;
  }
  EXPECT_NEAR(static_cast<double>(flips) / static_cast<double>(clean.log.size()), 0.5, 0.02);
}

TEST(Generator, SameSeedSameBytes) {
  const auto a = generate_world(testing::small_world(3));
  const auto b = generate_world(testing::small_world(3));
  EXPECT_EQ(serialize_social(a.graph), serialize_social(b.graph));
  EXPECT_EQ(serialize_interactions(a.log), serialize_interactions(b.log));
  EXPECT_EQ(a.truth.serialize_users(), b.truth.serialize_users());
  EXPECT_EQ(a.truth.serialize_items(), b.truth.serialize_items());
  EXPECT_EQ(a.catalog.serialize(), b.catalog.serialize());
  const auto c = generate_world(testing::small_world(4));
  EXPECT_NE(serialize_interactions(a.log), serialize_interactions(c.log));
}

TEST(Generator, SharedEntityStructureIsBlockDiagonalWithoutLeak) {
  auto config = testing::small_world(5);
  config.leak = 0.0;
  config.entities_per_group = 3;
  const auto w = generate_world(config);
  const auto truth = truth_map(w);
  const auto& g = w.graph;
  for (std::size_t u = 0; u < g.user_count(); ++u) {
    for (std::size_t v = u + 1; v < g.user_count(); ++v) {
      if (truth.at(g.users()[u]) == truth.at(g.users()[v])) continue;
      for (RelationId l = 0; l < g.relation_count(); ++l) {
        const auto a = g.entities(u, l);
        const auto b = g.entities(v, l);
        std::vector<std::size_t> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        EXPECT_TRUE(common.empty()) << u << " " << v;
      }
    }
  }
}

TEST(Generator, EveryUserHoldsARelationAndColdUsersAreSparse) {
  const auto w = generate_world(testing::small_world(6));
  EXPECT_EQ(w.graph.user_count(), 160u);
  const auto split = temporal_split(w.log, w.config.train_fraction);
  const auto cold = cold_split(split.train, split.test, w.config.cold_threshold);
  EXPECT_FALSE(cold.cold_users.empty());
  EXPECT_LT(cold.cold_users.size(), w.graph.user_count());
}

TEST(Generator, RejectsInfeasibleConfig) {
  auto config = testing::small_world(7);
  config.groups = 0;
  EXPECT_THROW(config.validate(), ConfigError);
  config = testing::small_world(7);
  config.leak = 1.5;
  EXPECT_THROW(generate_world(config), ConfigError);
}

InteractionLog ten_records() {
  InteractionLog log;
  for (int i = 0; i < 10; ++i) log.push_back({static_cast<UserId>(i % 3), static_cast<ItemId>(i), i % 2, 9 - i});
  return log;
}

TEST(TemporalSplit, MedianSplitAndOrdering) {
  const auto split = temporal_split(ten_records(), 0.5);
  EXPECT_EQ(split.train.size(), 5u);
  EXPECT_EQ(split.test.size(), 5u);
  std::int64_t max_train = 0;
  for (const auto& r : split.train) max_train = std::max(max_train, r.timestamp);
  for (const auto& r : split.test) EXPECT_LE(max_train, r.timestamp);
  // Relative record order is preserved.
  EXPECT_TRUE(std::is_sorted(split.train.begin(), split.train.end(),
                             [](const auto& a, const auto& b) { return a.item < b.item; }));
}

TEST(TemporalSplit, DayRatioOnGeneratedWorld) {
  const auto w = generate_world(testing::small_world(8));
  const auto split = temporal_split(w.log, 14.0 / 15.0);
  EXPECT_EQ(split.train.size() + split.test.size(), w.log.size());
  EXPECT_FALSE(split.degenerate);
  std::int64_t max_train = 0;
  for (const auto& r : split.train) max_train = std::max(max_train, r.timestamp);
  for (const auto& r : split.test) EXPECT_LT(max_train, r.timestamp);
}

TEST(TemporalSplit, EqualTimestampsFallBackToRecordOrder) {
  InteractionLog log(6, Interaction{1, 2, 1, 42});
  const auto split = temporal_split(log, 0.5);
  EXPECT_TRUE(split.degenerate);
  EXPECT_EQ(split.train.size(), 3u);
}

TEST(ColdSplit, ThresholdBoundaries) {
  InteractionLog train{{1, 1, 1, 0}, {1, 2, 0, 1}, {2, 3, 1, 2}};
  InteractionLog test{{1, 4, 1, 5}, {2, 5, 0, 6}, {3, 6, 1, 7}};
  const auto all = cold_split(train, test, kNoColdThreshold);
  EXPECT_EQ(all.cold, all.full);
  const auto zero = cold_split(train, test, 0);
  EXPECT_EQ(zero.cold_users, (std::vector<UserId>{3}));
  EXPECT_EQ(zero.cold.size(), 1u);
}

TEST(ColdSplit, MatchesGroupByCountOracle) {
  const auto w = generate_world(testing::small_world(9));
  const auto split = temporal_split(w.log, 14.0 / 15.0);
  for (std::size_t threshold : {0u, 1u, 3u, 10u}) {
    const auto cold = cold_split(split.train, split.test, threshold);
    std::map<UserId, std::size_t> counts;
    for (const auto& r : split.train) ++counts[r.user];
    std::set<UserId> expected_users;
    for (const auto& r : split.test) {
      const auto it = counts.find(r.user);
      if (it == counts.end() || it->second <= threshold) expected_users.insert(r.user);
    }
    InteractionLog expected;
    for (const auto& r : split.test) {
      if (expected_users.count(r.user)) expected.push_back(r);
    }
    EXPECT_EQ(cold.cold, expected) << threshold;
    for (auto u : expected_users) {
      EXPECT_TRUE(std::binary_search(cold.cold_users.begin(), cold.cold_users.end(), u));
    }
  }
}

TEST(InteractionFile, RoundTripsAndRejectsBadLines) {
  const auto log = ten_records();
  EXPECT_EQ(parse_interactions_text(serialize_interactions(log)), log);
  EXPECT_THROW(parse_interactions_text("1\t2\t1\n"), DataError);
  EXPECT_THROW(parse_interactions_text("1\t2\t3\t4\n"), DataError);
  EXPECT_THROW(parse_interactions_text("1\tx\t1\t4\n"), DataError);
  EXPECT_THROW(ItemCatalog::parse("1\n"), DataError);
}

}  // namespace
}  // namespace socialrec
