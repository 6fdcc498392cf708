#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "socialrec/error.hpp"
#include "socialrec/social_graph.hpp"
#include "support.hpp"

namespace socialrec {
namespace {

RelationSchema two_relations() { return RelationSchema({"star", "friend"}); }

TEST(SocialParse, EmptyTextGivesEmptyGraph) {
  const auto g = parse_social_text("", RelationSchema::defaults());
  EXPECT_EQ(g.user_count(), 0u);
  EXPECT_EQ(g.relation_count(), 4u);
}

TEST(SocialParse, DuplicateLinesCollapse) {
  const auto g = parse_social_text("7\tstar\t3\n7\tstar\t3\n7\tstar\t3\n", two_relations());
  EXPECT_EQ(g.user_count(), 1u);
  EXPECT_EQ(g.entity_count(0, 0), 1u);
  EXPECT_EQ(g.record_count(0), 1u);
}

TEST(SocialParse, CountsMatchLineCountOracle) {
  const std::string text =
      "1\tstar\t10\n1\tstar\t11\n1\tfriend\t5\n"
      "2\tstar\t10\n2\tfriend\t5\n2\tfriend\t6\n2\tfriend\t7\n2\tfriend\t6\n";
  const auto g = parse_social_text(text, two_relations());

  // Oracle: distinct (user, relation, entity) lines grouped by (user, relation).
  std::set<std::string> distinct;
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!distinct.insert(line).second) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    ++counts[{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1)}];
  }
  for (const auto& [key, n] : counts) {
    const auto u = g.user_index(std::stoull(key.first));
    const auto l = *g.schema().find(key.second);
    EXPECT_EQ(g.entity_count(u, l), n) << key.first << " " << key.second;
  }
  EXPECT_EQ(g.record_count(0) + g.record_count(1), distinct.size());
}

TEST(SocialParse, MalformedInputIsDataError) {
  EXPECT_THROW(parse_social_text("1\tstar\n", two_relations()), DataError);
  EXPECT_THROW(parse_social_text("1\tnope\t3\n", two_relations()), DataError);
  EXPECT_THROW(parse_social_text("x\tstar\t3\n", two_relations()), DataError);
  EXPECT_THROW(parse_social_text("1\tstar\t3\t4\n", two_relations()), DataError);
}

TEST(SocialParse, SerializeRoundTrips) {
  Rng rng = make_rng(1, "test.graph");
  const auto g = testing::random_graph(rng, 30, 3, 10);
  const auto text = serialize_social(g);
  EXPECT_EQ(parse_social_text(text, g.schema()), g);
  EXPECT_EQ(serialize_social(parse_social_text(text, g.schema())), text);
}

TEST(SocialEmbedding, AbsentRelationsAreZeroBlocks) {
  const auto g = parse_social_text("1\tstar\t4\n2\tfriend\t9\n", two_relations());
  Rng rng = make_rng(2, "test.emb");
  const std::size_t dims[] = {3, 2};
  const auto table = EntityEmbeddingTable::random(g, dims, 1.0, rng);
  const auto x = social_embedding_of(g, table, 1);
  ASSERT_EQ(x.size(), 5u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(x[i], table.relation(0)(0, i));
  EXPECT_EQ(x[3], 0.0);
  EXPECT_EQ(x[4], 0.0);
  EXPECT_THROW(social_embedding_of(g, table, 99), InvalidInput);
}

TEST(SocialEmbedding, UserWithoutRelationsIsAllZero) {
  // A graph built from records only holds users with a relation; an empty table row
  // set still produces the full width.
  const auto g = parse_social_text("1\tstar\t4\n", two_relations());
  const EntityEmbeddingTable table({Tensor2(1, 3, 1.0), Tensor2(0, 2)});
  const auto x = social_embedding(g, table, 0);
  EXPECT_EQ(x, (std::vector<double>{1, 1, 1, 0, 0}));
}

TEST(SocialEmbedding, BlockIsMeanOfEntities) {
  const auto g = parse_social_text("1\tstar\t4\n1\tstar\t5\n1\tstar\t8\n1\tfriend\t2\n", two_relations());
  Rng rng = make_rng(3, "test.emb");
  const std::size_t dims[] = {4, 2};
  const auto table = EntityEmbeddingTable::random(g, dims, 1.0, rng);
  const auto x = social_embedding(g, table, 0);
  for (std::size_t c = 0; c < 4; ++c) {
    double sum = 0.0;
    for (std::size_t e = 0; e < 3; ++e) sum += table.relation(0)(e, c);
    EXPECT_NEAR(x[c], sum / 3.0, 1e-15);
  }
  EXPECT_EQ(x[4], table.relation(1)(0, 0));
}

TEST(SocialEmbedding, EntityGradientMatchesFiniteDifferences) {
  Rng rng = make_rng(4, "test.entity.fd");
  const auto g = testing::random_graph(rng, 12, 3, 6);
  const std::size_t dims[] = {3, 2, 4};
  auto table = EntityEmbeddingTable::random(g, dims, 1.0, rng);
  for (std::size_t u = 0; u < g.user_count(); ++u) {
    const auto c = testing::random_vector(rng, table.layout().total());
    std::vector<Tensor2> grads;
    for (RelationId l = 0; l < 3; ++l) grads.emplace_back(table.relation(l).rows(), table.relation(l).cols());
    std::vector<std::vector<std::size_t>> touched(3);
    accumulate_entity_gradient(g, u, c, table.layout(), grads, touched);
    for (RelationId l = 0; l < 3; ++l) {
      EXPECT_EQ(touched[l].size(), g.entity_count(u, l));
      auto values = table.relation(l).values();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double numeric =
            testing::central_difference(values[i], [&] { return dot(c, social_embedding(g, table, u)); });
        EXPECT_NEAR(grads[l].values()[i], numeric, 1e-9);
      }
    }
  }
}

TEST(MaskRelations, ZeroFractionIsIdentity) {
  const BlockLayout layout({2, 2, 2});
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  const RelationId present[] = {0, 1, 2};
  Rng rng = make_rng(5, "test.mask");
  EXPECT_EQ(mask_relations(x, layout, present, 0.0, rng), x);
}

TEST(MaskRelations, SinglePresentRelationSurvives) {
  const BlockLayout layout({2, 2});
  const std::vector<double> x{1, 2, 0, 0};
  const RelationId present[] = {0};
  for (double fraction : {0.5, 0.99}) {
    Rng rng = make_rng(6, "test.mask");
    EXPECT_EQ(mask_relations(x, layout, present, fraction, rng), x);
  }
  Rng rng = make_rng(6, "test.mask");
  EXPECT_THROW(mask_relations(x, layout, present, 1.0, rng), InvalidInput);
}

TEST(MaskRelations, MatchesSeededSamplingOracle) {
  const BlockLayout layout({2, 3, 1, 2});
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
  const RelationId present[] = {0, 1, 2, 3};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = make_rng(seed, "test.mask");
    const auto masked = mask_relations(x, layout, present, 0.5, rng);

    Rng oracle_rng = make_rng(seed, "test.mask");
    std::vector<RelationId> order(std::begin(present), std::end(present));
    std::shuffle(order.begin(), order.end(), oracle_rng);
    const std::set<RelationId> zeroed(order.begin(), order.begin() + 2);

    std::size_t zero_blocks = 0;
    for (RelationId l = 0; l < 4; ++l) {
      bool all_zero = true;
      bool all_same = true;
      for (std::size_t i = layout.offset(l); i < layout.offset(l) + layout.dim(l); ++i) {
        all_zero = all_zero && masked[i] == 0.0;
        all_same = all_same && masked[i] == x[i];
      }
      if (zeroed.count(l)) {
        EXPECT_TRUE(all_zero) << seed << " " << l;
        ++zero_blocks;
      } else {
        EXPECT_TRUE(all_same) << seed << " " << l;
      }
    }
    EXPECT_EQ(zero_blocks, 2u);
  }
}

TEST(Neighbors, UserWithoutEntitiesHasNone) {
  const auto g = parse_social_text("1\tstar\t4\n2\tstar\t4\n2\tfriend\t1\n", two_relations());
  EXPECT_TRUE(neighbors(g, 0, 1).empty());
  EXPECT_EQ(neighbors(g, 1, 0), (std::vector<std::size_t>{0}));
}

TEST(Neighbors, IdenticalEntitySetsAreMutual) {
  const auto g = parse_social_text("1\tstar\t4\n1\tstar\t5\n2\tstar\t4\n2\tstar\t5\n", two_relations());
  EXPECT_EQ(neighbors(g, 0, 0), (std::vector<std::size_t>{1}));
  EXPECT_EQ(neighbors(g, 1, 0), (std::vector<std::size_t>{0}));
}

std::vector<std::size_t> pairwise_oracle(const SocialGraph& g, std::size_t u, RelationId l) {
  std::vector<std::size_t> out;
  const auto mine = g.entities(u, l);
  for (std::size_t v = 0; v < g.user_count(); ++v) {
    if (v == u) continue;
    const auto theirs = g.entities(v, l);
    const bool shared = std::any_of(mine.begin(), mine.end(), [&](std::size_t e) {
      return std::find(theirs.begin(), theirs.end(), e) != theirs.end();
    });
    if (shared) out.push_back(v);
  }
  return out;
}

TEST(Neighbors, MatchPairwiseIntersectionOracle) {
  const auto toy = parse_social_text(
      "1\tstar\t1\n2\tstar\t1\n2\tstar\t2\n3\tstar\t2\n4\tstar\t3\n5\tfriend\t1\n1\tfriend\t1\n", two_relations());
  for (std::size_t u = 0; u < toy.user_count(); ++u) {
    for (RelationId l = 0; l < 2; ++l) EXPECT_EQ(neighbors(toy, u, l), pairwise_oracle(toy, u, l));
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, "test.neighbors");
    const auto g = testing::random_graph(rng, 25, 3, 8, 0.5);
    for (std::size_t u = 0; u < g.user_count(); ++u) {
      for (RelationId l = 0; l < 3; ++l) EXPECT_EQ(neighbors(g, u, l), pairwise_oracle(g, u, l));
    }
  }
}

}  // namespace
}  // namespace socialrec
