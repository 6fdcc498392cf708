#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "socialrec/ccm.hpp"
#include "socialrec/checkpoint.hpp"
#include "socialrec/dense_net.hpp"
#include "socialrec/interactions.hpp"
#include "socialrec/social_graph.hpp"
#include "socialrec/tensor.hpp"

namespace socialrec {

enum class Variant { kVanilla, kSocial, kSocialAvg, kNoCalibrator, kNoMerge };

std::string_view to_string(Variant variant) noexcept;
Variant parse_variant(std::string_view name);
/// Every variant in report order.
std::span<const Variant> all_variants() noexcept;

bool uses_social(Variant variant) noexcept;
bool uses_attention(Variant variant) noexcept;
/// CCM stages the variant's grouping is built with.
CcmStages ccm_stages(Variant variant) noexcept;

struct RecommenderConfig {
  std::size_t behavior_dim = 16;  // width of each id / category / history block
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  std::size_t match_dim = 32;
  std::size_t attention_hidden = 16;
  std::size_t epochs = 12;  // upper bound when early stopping is on
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double embedding_init_scale = 0.05;
  double validation_fraction = 0.1;  // latest share of the training period held out; 0 disables
  std::size_t patience = 2;          // epochs without a validation improvement before stopping
};

/// Id embeddings behind F_u = user id ⊕ mean clicked item and F_t = item id ⊕ category.
struct BehaviorEmbeddingModel {
  Tensor2 users;       // user index x behavior_dim
  Tensor2 items;       // item index x behavior_dim
  Tensor2 categories;  // category x behavior_dim

  std::size_t dim() const noexcept { return users.cols(); }
  std::size_t user_feature_dim() const noexcept { return 2 * dim(); }
  std::size_t item_feature_dim() const noexcept { return 2 * dim(); }

  friend bool operator==(const BehaviorEmbeddingModel&, const BehaviorEmbeddingModel&) = default;
};

/// `history` holds item indices; an empty history gives a zero history block.
std::vector<double> behavior_user_embedding(const BehaviorEmbeddingModel& model, std::size_t user,
                                            std::span<const std::size_t> history);
std::vector<double> behavior_item_embedding(const BehaviorEmbeddingModel& model, std::size_t item,
                                            std::size_t category);

struct TowerPair {
  DenseNet user;  // h
  DenseNet item;  // g

  friend bool operator==(const TowerPair&, const TowerPair&) = default;
};

/// sigmoid(h(F_u) · g(F_t)), kept strictly inside (0, 1).
double score_vanilla(const TowerPair& towers, std::span<const double> user_features,
                     std::span<const double> item_features);
/// sigmoid(h(F_u ⊕ H_u) · g(F_t)).
double score_social(const TowerPair& towers, std::span<const double> user_features,
                    std::span<const double> social, std::span<const double> item_features);

/// Mean of X_v over in-group neighbors v of u in relation l, plus X_u; X_u alone when no
/// in-group neighbor exists. `group_of` is indexed by graph user index, `social` holds one
/// row of X per graph user index.
std::vector<double> aggregate_relation(const SocialGraph& graph, std::span<const std::size_t> group_of,
                                       const Tensor2& social, std::size_t u, RelationId l);
/// One row per relation.
Tensor2 aggregate_relations(const SocialGraph& graph, std::span<const std::size_t> group_of,
                            const Tensor2& social, std::size_t u);

/// softmax over relations of leaky_relu(q(F_u ⊕ H_u^l)).
std::vector<double> attention_weights(const DenseNet& attention, std::span<const double> user_features,
                                      const Tensor2& relation_reps);
/// Σ_l alpha_l H_u^l.
std::vector<double> social_representation(std::span<const double> alpha, const Tensor2& relation_reps);
/// Uniform-weight social_representation.
std::vector<double> social_representation_avg(const Tensor2& relation_reps);

/// Training and test examples over dense user / item indices.
struct RecDataset {
  struct Example {
    std::size_t user = 0;
    std::size_t item = 0;
    int label = 0;
    std::size_t history_len = 0;  // prefix of history[user] visible to this example
    std::int64_t timestamp = 0;
  };

  std::vector<UserId> users;  // sorted; index = position
  std::vector<ItemId> items;  // sorted; index = position
  std::vector<std::size_t> item_category;
  std::size_t category_count = 0;
  std::vector<std::vector<std::size_t>> history;  // training clicks per user, by time
  std::vector<Example> train;
  std::vector<Example> test;
  std::vector<Interaction> test_records;  // parallel to `test`

  std::optional<std::size_t> find_user(UserId user) const;
  std::optional<std::size_t> find_item(ItemId item) const;
};

/// Training examples see only clicks strictly earlier than themselves; test examples see
/// every training click. Users of `graph` without interactions are included.
RecDataset build_dataset(const TemporalSplit& split, const ItemCatalog& catalog,
                         const SocialGraph* graph = nullptr);

/// Per-user H_u^l blocks computed once from frozen CCM output.
struct SocialContext {
  std::size_t relations = 0;
  std::size_t dim = 0;
  std::vector<Tensor2> relation_reps;  // by dataset user index; relations x dim

  bool empty() const noexcept { return relation_reps.empty(); }
};

/// Users missing from the graph get all-zero blocks. Throws InvalidInput when a graph user
/// has no group in `assignments`.
SocialContext build_social_context(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                   const GroupAssignmentTable& assignments,
                                   std::span<const UserId> users);

struct RecommenderModel {
  Variant variant = Variant::kVanilla;
  BehaviorEmbeddingModel behavior;
  TowerPair towers;
  DenseNet attention;  // empty unless uses_attention(variant)
  std::vector<UserId> users;
  std::vector<ItemId> items;
  std::vector<std::size_t> item_category;

  friend bool operator==(const RecommenderModel&, const RecommenderModel&) = default;
};

/// Randomly initialised model; each parameter group draws from its own stream so that
/// variants sharing a seed share their common initial parameters.
RecommenderModel init_recommender(const RecDataset& data, std::size_t social_dim, std::size_t relations,
                                  const RecommenderConfig& config, Variant variant, std::uint64_t seed);

/// Forward pass state of one example, reused across calls.
struct ScoreTrace {
  std::vector<double> user_features;
  std::vector<double> item_features;
  std::vector<double> tower_input;
  std::vector<double> attention_input;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<ForwardCache> attention_caches;
  ForwardCache user_cache;
  ForwardCache item_cache;
  double logit = 0.0;
  double score = 0.0;
};

/// Gradient accumulator for every trainable parameter of a RecommenderModel.
struct RecommenderGrad {
  DenseNetGrad user_tower;
  DenseNetGrad item_tower;
  DenseNetGrad attention;
  Tensor2 users;
  Tensor2 items;
  Tensor2 categories;
  std::vector<std::size_t> touched_users;
  std::vector<std::size_t> touched_items;
  std::vector<std::size_t> touched_categories;

  RecommenderGrad() = default;
  explicit RecommenderGrad(const RecommenderModel& model);
  void zero();
};

/// Probability for (user, item) with the given history prefix. `social` may be null only
/// for the vanilla variant.
double score_example(const RecommenderModel& model, const SocialContext* social,
                     std::span<const std::vector<std::size_t>> history, const RecDataset::Example& ex,
                     ScoreTrace& trace);

/// Accumulates d(loss)/d(params) given d(loss)/d(logit) for the trace of `ex`.
void backward_example(const RecommenderModel& model, const SocialContext* social,
                      std::span<const std::vector<std::size_t>> history, const RecDataset::Example& ex,
                      const ScoreTrace& trace, double d_logit, RecommenderGrad& grad);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> validation_auc;  // empty when early stopping is off
  std::size_t best_epoch = 0;           // 1-based epoch whose parameters were kept
  std::size_t validation_examples = 0;
};

/// Training examples after `cutoff` form the validation slice, where cutoff sits at
/// 1 - fraction of the training time range. Returns (fit, validation) indices into data.train;
/// validation is empty when the fraction is 0 or the range is degenerate.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_split(const RecDataset& data,
                                                                               double fraction);

/// Mini-batch BCE training with Adam; embedding rows are updated lazily. With a validation
/// slice holding both labels, trains on the rest and keeps the parameters of the epoch with
/// the highest validation AUC, stopping after `patience` epochs without improvement.
TrainReport train_recommender(RecommenderModel& model, const RecDataset& data,
                              const SocialContext* social, const RecommenderConfig& config,
                              std::uint64_t seed);

/// Scores for data.test (or data.train) in order.
std::vector<double> score_examples(const RecommenderModel& model, const RecDataset& data,
                                   const SocialContext* social, std::span<const RecDataset::Example> examples);

/// Items by descending score, ties by ascending item id, truncated to k.
std::vector<std::pair<ItemId, double>> rank_items(std::span<const ItemId> items,
                                                  std::span<const double> scores, std::size_t k);

std::vector<std::pair<ItemId, double>> predict_topk(const RecommenderModel& model, const RecDataset& data,
                                                    const SocialContext* social, UserId user,
                                                    std::span<const ItemId> candidates, std::size_t k);

/// `user_id<TAB>item_id<TAB>score` with nine decimals.
std::string serialize_predictions(std::span<const Interaction> records, std::span<const double> scores);

/// `ccm_hash` identifies the CCM checkpoint the social variants were trained against; the
/// entity table is embedded so the model can rebuild its social context from a graph.
Checkpoint recommender_checkpoint(const RecommenderModel& model, const RecommenderConfig& config,
                                  std::uint64_t seed, const std::string& ccm_hash,
                                  const SocialGraph* graph, const EntityEmbeddingTable* table);
RecommenderModel load_recommender(const Checkpoint& ckpt);

}  // namespace socialrec
