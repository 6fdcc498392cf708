#include "socialrec/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>

#include "socialrec/adam.hpp"
#include "socialrec/error.hpp"
#include "socialrec/losses.hpp"
#include "socialrec/metrics.hpp"
#include "socialrec/rng.hpp"

namespace socialrec {

namespace {

constexpr Variant kVariants[] = {Variant::kVanilla, Variant::kSocial, Variant::kNoCalibrator,
                                 Variant::kNoMerge, Variant::kSocialAvg};

// Keeps reported probabilities strictly inside (0, 1) even for saturated logits.
constexpr double kScoreFloor = 1e-12;

double squash(double logit) { return std::clamp(sigmoid(logit), kScoreFloor, 1.0 - kScoreFloor); }

double tower_logit(const TowerPair& towers, std::span<const double> user_in,
                   std::span<const double> item_in) {
  const auto hu = forward(towers.user, user_in);
  const auto gt = forward(towers.item, item_in);
  if (hu.size() != gt.size()) throw InvalidInput("towers: output widths differ");
  return dot(hu, gt);
}

Tensor2 normal_table(std::size_t rows, std::size_t cols, double scale, Rng rng) {
  Tensor2 t(rows, cols);
  std::normal_distribution<double> dist(0.0, scale);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

void unique_rows(std::vector<std::size_t>& rows) {
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
}

void add_net_blocks(std::vector<ParamBlock>& blocks, DenseNet& net, const DenseNetGrad& grad) {
  auto& layers = net.mutable_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    blocks.push_back({layers[i].weight.values(), grad.weight[i].values()});
    blocks.push_back({layers[i].bias, grad.bias[i]});
  }
}

void zero_rows(Tensor2& t, std::span<const std::size_t> rows) {
  for (auto r : rows) std::fill(t.row(r).begin(), t.row(r).end(), 0.0);
}

Tensor2 ids_tensor(std::span<const std::uint64_t> ids) {
  Tensor2 t(1, ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) t(0, i) = static_cast<double>(ids[i]);
  return t;
}

std::vector<std::uint64_t> tensor_ids(const Tensor2& t) {
  std::vector<std::uint64_t> out;
  out.reserve(t.size());
  for (auto v : t.values()) out.push_back(static_cast<std::uint64_t>(v));
  return out;
}

}  // namespace

std::string_view to_string(Variant variant) noexcept {
  switch (variant) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kSocial: return "social";
    case Variant::kSocialAvg: return "social-avg";
    case Variant::kNoCalibrator: return "no-calibrator";
    case Variant::kNoMerge: return "no-merge";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (auto v : kVariants) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected vanilla, social, social-avg, no-calibrator or no-merge)");
}

std::span<const Variant> all_variants() noexcept { return kVariants; }

bool uses_social(Variant variant) noexcept { return variant != Variant::kVanilla; }

bool uses_attention(Variant variant) noexcept {
  return variant == Variant::kSocial || variant == Variant::kNoCalibrator || variant == Variant::kNoMerge;
}

CcmStages ccm_stages(Variant variant) noexcept {
  return {variant != Variant::kNoCalibrator, variant != Variant::kNoMerge};
}

std::vector<double> behavior_user_embedding(const BehaviorEmbeddingModel& model, std::size_t user,
                                            std::span<const std::size_t> history) {
  if (user >= model.users.rows()) throw InvalidInput("behavior_user_embedding: unknown user index");
  const std::size_t d = model.dim();
  std::vector<double> out(2 * d, 0.0);
  std::copy(model.users.row(user).begin(), model.users.row(user).end(), out.begin());
  if (!history.empty()) {
    std::span<double> block(out.data() + d, d);
    for (auto item : history) axpy(1.0, model.items.row(item), block);
    const double inv = 1.0 / static_cast<double>(history.size());
    for (auto& v : block) v *= inv;
  }
  return out;
}

std::vector<double> behavior_item_embedding(const BehaviorEmbeddingModel& model, std::size_t item,
                                            std::size_t category) {
  if (item >= model.items.rows()) throw InvalidInput("behavior_item_embedding: unknown item index");
  if (category >= model.categories.rows()) throw InvalidInput("behavior_item_embedding: unknown category");
  std::vector<double> out(model.items.row(item).begin(), model.items.row(item).end());
  out.insert(out.end(), model.categories.row(category).begin(), model.categories.row(category).end());
  return out;
}

double score_vanilla(const TowerPair& towers, std::span<const double> user_features,
                     std::span<const double> item_features) {
  return squash(tower_logit(towers, user_features, item_features));
}

double score_social(const TowerPair& towers, std::span<const double> user_features,
                    std::span<const double> social, std::span<const double> item_features) {
  std::vector<double> user_in(user_features.begin(), user_features.end());
  user_in.insert(user_in.end(), social.begin(), social.end());
  return squash(tower_logit(towers, user_in, item_features));
}

std::vector<double> aggregate_relation(const SocialGraph& graph, std::span<const std::size_t> group_of,
                                       const Tensor2& social, std::size_t u, RelationId l) {
  if (group_of.size() != graph.user_count() || social.rows() != graph.user_count()) {
    throw InvalidInput("aggregate_relation: groups / embeddings do not cover the graph");
  }
  std::vector<double> out(social.cols(), 0.0);
  std::size_t count = 0;
  for (auto v : neighbors(graph, u, l)) {
    if (group_of[v] != group_of[u]) continue;
    axpy(1.0, social.row(v), out);
    ++count;
  }
  if (count > 0) {
    const double inv = 1.0 / static_cast<double>(count);
    for (auto& x : out) x *= inv;
  }
  axpy(1.0, social.row(u), out);
  return out;
}

Tensor2 aggregate_relations(const SocialGraph& graph, std::span<const std::size_t> group_of,
                            const Tensor2& social, std::size_t u) {
  Tensor2 out(graph.relation_count(), social.cols());
  for (RelationId l = 0; l < graph.relation_count(); ++l) {
    const auto h = aggregate_relation(graph, group_of, social, u, l);
    std::copy(h.begin(), h.end(), out.row(l).begin());
  }
  return out;
}

std::vector<double> attention_weights(const DenseNet& attention, std::span<const double> user_features,
                                      const Tensor2& relation_reps) {
  std::vector<double> input(user_features.begin(), user_features.end());
  input.resize(user_features.size() + relation_reps.cols());
  std::vector<double> logits(relation_reps.rows());
  for (std::size_t l = 0; l < relation_reps.rows(); ++l) {
    std::copy(relation_reps.row(l).begin(), relation_reps.row(l).end(),
              input.begin() + static_cast<std::ptrdiff_t>(user_features.size()));
    const auto beta = forward(attention, input);
    if (beta.size() != 1) throw InvalidInput("attention_weights: attention net must output a scalar");
    logits[l] = activate(Activation::kLeakyRelu, beta[0]);
  }
  return softmax(logits);
}

std::vector<double> social_representation(std::span<const double> alpha, const Tensor2& relation_reps) {
  if (alpha.size() != relation_reps.rows()) {
    throw InvalidInput("social_representation: weight count differs from relation count");
  }
  std::vector<double> out(relation_reps.cols(), 0.0);
  for (std::size_t l = 0; l < alpha.size(); ++l) axpy(alpha[l], relation_reps.row(l), out);
  return out;
}

std::vector<double> social_representation_avg(const Tensor2& relation_reps) {
  if (relation_reps.rows() == 0) throw InvalidInput("social_representation_avg: no relations");
  const std::vector<double> uniform(relation_reps.rows(), 1.0 / static_cast<double>(relation_reps.rows()));
  return social_representation(uniform, relation_reps);
}

std::optional<std::size_t> RecDataset::find_user(UserId user) const {
  const auto it = std::lower_bound(users.begin(), users.end(), user);
  if (it == users.end() || *it != user) return std::nullopt;
  return static_cast<std::size_t>(it - users.begin());
}

std::optional<std::size_t> RecDataset::find_item(ItemId item) const {
  const auto it = std::lower_bound(items.begin(), items.end(), item);
  if (it == items.end() || *it != item) return std::nullopt;
  return static_cast<std::size_t>(it - items.begin());
}

RecDataset build_dataset(const TemporalSplit& split, const ItemCatalog& catalog, const SocialGraph* graph) {
  RecDataset data;
  for (const auto* part : {&split.train, &split.test}) {
    for (const auto& r : *part) data.users.push_back(r.user);
  }
  if (graph) data.users.insert(data.users.end(), graph->users().begin(), graph->users().end());
  std::sort(data.users.begin(), data.users.end());
  data.users.erase(std::unique(data.users.begin(), data.users.end()), data.users.end());

  data.items = catalog.items();
  data.item_category = catalog.categories();
  data.category_count = catalog.category_count();

  auto resolve = [&](const Interaction& r) {
    const auto item = data.find_item(r.item);
    if (!item) throw DataError("interaction references item " + std::to_string(r.item) + " missing from the item file");
    return RecDataset::Example{*data.find_user(r.user), *item, r.label, 0, r.timestamp};
  };

  // Clicks per user ordered by time; equal timestamps keep log order.
  std::vector<std::vector<std::pair<std::int64_t, std::size_t>>> clicks(data.users.size());
  for (const auto& r : split.train) {
    const auto ex = resolve(r);
    if (r.label == 1) clicks[ex.user].emplace_back(r.timestamp, ex.item);
  }
  data.history.resize(data.users.size());
  std::vector<std::vector<std::int64_t>> click_times(data.users.size());
  for (std::size_t u = 0; u < clicks.size(); ++u) {
    std::stable_sort(clicks[u].begin(), clicks[u].end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [ts, item] : clicks[u]) {
      click_times[u].push_back(ts);
      data.history[u].push_back(item);
    }
  }

  for (const auto& r : split.train) {
    auto ex = resolve(r);
    const auto& times = click_times[ex.user];
    ex.history_len = static_cast<std::size_t>(
        std::lower_bound(times.begin(), times.end(), r.timestamp) - times.begin());
    data.train.push_back(ex);
  }
  for (const auto& r : split.test) {
    auto ex = resolve(r);
    ex.history_len = data.history[ex.user].size();
    data.test.push_back(ex);
    data.test_records.push_back(r);
  }
  return data;
}

SocialContext build_social_context(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                   const GroupAssignmentTable& assignments, std::span<const UserId> users) {
  std::vector<std::size_t> group_of(graph.user_count());
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    const auto g = assignments.group_of(graph.users()[u]);
    if (!g) {
      throw InvalidInput("social context: user " + std::to_string(graph.users()[u]) +
                         " has no group assignment");
    }
    group_of[u] = *g;
  }
  const Tensor2 social = social_embeddings(graph, table);

  SocialContext ctx;
  ctx.relations = graph.relation_count();
  ctx.dim = table.layout().total();
  ctx.relation_reps.reserve(users.size());
  for (auto user : users) {
    const auto u = graph.find_user(user);
    ctx.relation_reps.push_back(u ? aggregate_relations(graph, group_of, social, *u)
                                  : Tensor2(ctx.relations, ctx.dim));
  }
  return ctx;
}

RecommenderModel init_recommender(const RecDataset& data, std::size_t social_dim, std::size_t relations,
                                  const RecommenderConfig& config, Variant variant, std::uint64_t seed) {
  if (config.behavior_dim == 0 || config.match_dim == 0) {
    throw ConfigError("recommender: embedding and match widths must be positive");
  }
  RecommenderModel model;
  model.variant = variant;
  model.users = data.users;
  model.items = data.items;
  model.item_category = data.item_category;

  const std::size_t b = config.behavior_dim;
  const double scale = config.embedding_init_scale;
  model.behavior.users = normal_table(data.users.size(), b, scale, make_rng(seed, "rec.init.users"));
  model.behavior.items = normal_table(data.items.size(), b, scale, make_rng(seed, "rec.init.items"));
  model.behavior.categories =
      normal_table(std::max<std::size_t>(data.category_count, 1), b, scale, make_rng(seed, "rec.init.categories"));

  const std::size_t user_in = 2 * b + (uses_social(variant) ? social_dim : 0);
  const std::size_t user_dims[] = {user_in, config.hidden1, config.hidden2, config.match_dim};
  const std::size_t item_dims[] = {2 * b, config.hidden1, config.hidden2, config.match_dim};
  auto rng_h = make_rng(seed, "rec.init.user_tower");
  auto rng_g = make_rng(seed, "rec.init.item_tower");
  model.towers.user = DenseNet::make(user_dims, Activation::kLeakyRelu, Activation::kIdentity, rng_h);
  model.towers.item = DenseNet::make(item_dims, Activation::kLeakyRelu, Activation::kIdentity, rng_g);
  if (uses_attention(variant)) {
    if (relations == 0 || social_dim == 0) throw ConfigError("recommender: attention needs relations");
    const std::size_t attn_dims[] = {2 * b + social_dim, config.attention_hidden, 1};
    auto rng_q = make_rng(seed, "rec.init.attention");
    model.attention = DenseNet::make(attn_dims, Activation::kLeakyRelu, Activation::kIdentity, rng_q);
  }
  return model;
}

RecommenderGrad::RecommenderGrad(const RecommenderModel& model)
    : user_tower(model.towers.user),
      item_tower(model.towers.item),
      attention(model.attention),
      users(model.behavior.users.rows(), model.behavior.users.cols()),
      items(model.behavior.items.rows(), model.behavior.items.cols()),
      categories(model.behavior.categories.rows(), model.behavior.categories.cols()) {}

void RecommenderGrad::zero() {
  user_tower.zero();
  item_tower.zero();
  attention.zero();
  zero_rows(users, touched_users);
  zero_rows(items, touched_items);
  zero_rows(categories, touched_categories);
  touched_users.clear();
  touched_items.clear();
  touched_categories.clear();
}

double score_example(const RecommenderModel& model, const SocialContext* social,
                     std::span<const std::vector<std::size_t>> history, const RecDataset::Example& ex,
                     ScoreTrace& trace) {
  const auto& hist = history[ex.user];
  trace.user_features = behavior_user_embedding(
      model.behavior, ex.user, std::span(hist).first(std::min(ex.history_len, hist.size())));
  trace.item_features = behavior_item_embedding(model.behavior, ex.item, model.item_category[ex.item]);

  trace.tower_input = trace.user_features;
  if (uses_social(model.variant)) {
    if (!social || social->empty()) throw InvalidInput("social variant scored without a social context");
    const Tensor2& reps = social->relation_reps[ex.user];
    const std::size_t relations = reps.rows();
    if (uses_attention(model.variant)) {
      const std::size_t fu = trace.user_features.size();
      trace.attention_input = trace.user_features;
      trace.attention_input.resize(fu + reps.cols());
      trace.attention_caches.resize(relations);
      trace.beta.resize(relations);
      std::vector<double> logits(relations);
      for (std::size_t l = 0; l < relations; ++l) {
        std::copy(reps.row(l).begin(), reps.row(l).end(),
                  trace.attention_input.begin() + static_cast<std::ptrdiff_t>(fu));
        forward(model.attention, trace.attention_input, trace.attention_caches[l]);
        trace.beta[l] = trace.attention_caches[l].output()[0];
        logits[l] = activate(Activation::kLeakyRelu, trace.beta[l]);
      }
      trace.alpha = softmax(logits);
      const auto h = social_representation(trace.alpha, reps);
      trace.tower_input.insert(trace.tower_input.end(), h.begin(), h.end());
    } else {
      trace.alpha.assign(relations, 1.0 / static_cast<double>(relations));
      const auto h = social_representation_avg(reps);
      trace.tower_input.insert(trace.tower_input.end(), h.begin(), h.end());
    }
  }

  forward(model.towers.user, trace.tower_input, trace.user_cache);
  forward(model.towers.item, trace.item_features, trace.item_cache);
  trace.logit = dot(trace.user_cache.output(), trace.item_cache.output());
  trace.score = squash(trace.logit);
  return trace.score;
}

void backward_example(const RecommenderModel& model, const SocialContext* social,
                      std::span<const std::vector<std::size_t>> history, const RecDataset::Example& ex,
                      const ScoreTrace& trace, double d_logit, RecommenderGrad& grad) {
  const auto hu = trace.user_cache.output();
  const auto gt = trace.item_cache.output();
  std::vector<double> d_hu(gt.begin(), gt.end());
  std::vector<double> d_gt(hu.begin(), hu.end());
  for (auto& v : d_hu) v *= d_logit;
  for (auto& v : d_gt) v *= d_logit;

  const auto d_tower_in = backward(model.towers.user, trace.user_cache, d_hu, grad.user_tower);
  const auto d_item_in = backward(model.towers.item, trace.item_cache, d_gt, grad.item_tower);

  const std::size_t fu = trace.user_features.size();
  std::vector<double> d_user(d_tower_in.begin(), d_tower_in.begin() + static_cast<std::ptrdiff_t>(fu));

  if (uses_attention(model.variant)) {
    const Tensor2& reps = social->relation_reps[ex.user];
    const std::span<const double> d_h(d_tower_in.data() + fu, d_tower_in.size() - fu);
    const std::size_t relations = reps.rows();
    std::vector<double> d_alpha(relations);
    double weighted = 0.0;
    for (std::size_t l = 0; l < relations; ++l) {
      d_alpha[l] = dot(d_h, reps.row(l));
      weighted += trace.alpha[l] * d_alpha[l];
    }
    for (std::size_t l = 0; l < relations; ++l) {
      const double d_logit_l = trace.alpha[l] * (d_alpha[l] - weighted);
      const double d_beta = d_logit_l * (trace.beta[l] > 0.0 ? 1.0 : kLeakySlope);
      const double d_out[] = {d_beta};
      const auto d_in = backward(model.attention, trace.attention_caches[l], d_out, grad.attention);
      axpy(1.0, std::span(d_in).first(fu), d_user);
    }
  }

  const std::size_t b = model.behavior.dim();
  axpy(1.0, std::span<const double>(d_user).first(b), grad.users.row(ex.user));
  grad.touched_users.push_back(ex.user);
  const auto& hist = history[ex.user];
  const std::size_t n = std::min(ex.history_len, hist.size());
  if (n > 0) {
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      axpy(inv, std::span<const double>(d_user).subspan(b, b), grad.items.row(hist[i]));
      grad.touched_items.push_back(hist[i]);
    }
  }
  axpy(1.0, std::span(d_item_in).first(b), grad.items.row(ex.item));
  grad.touched_items.push_back(ex.item);
  const auto category = model.item_category[ex.item];
  axpy(1.0, std::span(d_item_in).subspan(b, b), grad.categories.row(category));
  grad.touched_categories.push_back(category);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_split(const RecDataset& data,
                                                                               double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ConfigError("recommender: validation fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> fit(data.train.size());
  std::iota(fit.begin(), fit.end(), std::size_t{0});
  std::vector<std::size_t> valid;
  if (fraction == 0.0 || data.train.empty()) return {fit, valid};
  const auto [lo, hi] = std::minmax_element(data.train.begin(), data.train.end(),
                                            [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  if (lo->timestamp == hi->timestamp) return {fit, valid};
  const auto span = static_cast<double>(hi->timestamp - lo->timestamp);
  const auto cutoff = lo->timestamp + static_cast<std::int64_t>(std::floor((1.0 - fraction) * span));
  fit.clear();
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    (data.train[i].timestamp <= cutoff ? fit : valid).push_back(i);
  }
  if (fit.empty()) std::swap(fit, valid);
  return {fit, valid};
}

TrainReport train_recommender(RecommenderModel& model, const RecDataset& data, const SocialContext* social,
                              const RecommenderConfig& config, std::uint64_t seed) {
  if (uses_social(model.variant) && (!social || social->empty())) {
    throw InvalidInput("train_recommender: social variant requires group assignments");
  }
  if (config.batch_size == 0) throw ConfigError("recommender: batch size must be >= 1");

  TrainReport report;
  AdamState adam(AdamConfig{config.learning_rate});
  RecommenderGrad grad(model);
  ScoreTrace trace;
  auto [order, valid] = validation_split(data, config.validation_fraction);
  std::vector<RecDataset::Example> valid_examples;
  std::vector<int> valid_labels;
  for (auto i : valid) {
    valid_examples.push_back(data.train[i]);
    valid_labels.push_back(data.train[i].label);
  }
  // AUC needs both classes; without them the slice cannot rank epochs.
  if (std::adjacent_find(valid_labels.begin(), valid_labels.end(), std::not_equal_to<>()) == valid_labels.end()) {
    valid_examples.clear();
    order.resize(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  report.validation_examples = valid_examples.size();
  std::optional<RecommenderModel> best;
  double best_auc = -1.0;
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = make_rng(seed, "rec.shuffle", epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = data.train[order[i]];
        const double p = score_example(model, social, data.history, ex, trace);
        loss_sum += bce_loss(p, ex.label).loss;
        // d(BCE)/d(logit) = p - y.
        backward_example(model, social, data.history, ex, trace, (p - ex.label) * inv_batch, grad);
      }
      unique_rows(grad.touched_users);
      unique_rows(grad.touched_items);
      unique_rows(grad.touched_categories);
      std::vector<ParamBlock> blocks;
      add_net_blocks(blocks, model.towers.user, grad.user_tower);
      add_net_blocks(blocks, model.towers.item, grad.item_tower);
      add_net_blocks(blocks, model.attention, grad.attention);
      const std::size_t b = model.behavior.dim();
      blocks.push_back({model.behavior.users.values(), grad.users.values(), b, grad.touched_users});
      blocks.push_back({model.behavior.items.values(), grad.items.values(), b, grad.touched_items});
      blocks.push_back({model.behavior.categories.values(), grad.categories.values(), b, grad.touched_categories});
      adam_step(adam, blocks);
      grad.zero();
    }
    report.epoch_loss.push_back(order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size()));
    report.best_epoch = epoch + 1;
    if (valid_examples.empty()) continue;

    const auto scores = score_examples(model, data, social, valid_examples);
    const double valid_auc = auc(scores, valid_labels);
    report.validation_auc.push_back(valid_auc);
    if (valid_auc > best_auc) {
      best_auc = valid_auc;
      best = model;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  if (best) {
    model = std::move(*best);
    report.best_epoch = static_cast<std::size_t>(
        std::max_element(report.validation_auc.begin(), report.validation_auc.end()) -
        report.validation_auc.begin()) + 1;
  }
  return report;
}

std::vector<double> score_examples(const RecommenderModel& model, const RecDataset& data,
                                   const SocialContext* social, std::span<const RecDataset::Example> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  ScoreTrace trace;
  for (const auto& ex : examples) out.push_back(score_example(model, social, data.history, ex, trace));
  return out;
}

std::vector<std::pair<ItemId, double>> rank_items(std::span<const ItemId> items, std::span<const double> scores,
                                                  std::size_t k) {
  if (items.size() != scores.size()) throw InvalidInput("rank_items: items and scores differ in length");
  if (items.empty()) throw InvalidInput("rank_items: empty candidate set");
  if (k > items.size()) throw InvalidInput("rank_items: k exceeds the candidate count");
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  });
  std::vector<std::pair<ItemId, double>> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(items[order[i]], scores[order[i]]);
  return out;
}

std::vector<std::pair<ItemId, double>> predict_topk(const RecommenderModel& model, const RecDataset& data,
                                                    const SocialContext* social, UserId user,
                                                    std::span<const ItemId> candidates, std::size_t k) {
  if (candidates.empty()) throw InvalidInput("predict_topk: empty candidate set");
  const auto u = data.find_user(user);
  if (!u) throw InvalidInput("predict_topk: unknown user " + std::to_string(user));
  std::vector<double> scores;
  ScoreTrace trace;
  for (auto item : candidates) {
    const auto t = data.find_item(item);
    if (!t) throw InvalidInput("predict_topk: unknown item " + std::to_string(item));
    RecDataset::Example ex{*u, *t, 0, data.history[*u].size()};
    scores.push_back(score_example(model, social, data.history, ex, trace));
  }
  return rank_items(candidates, scores, k);
}

std::string serialize_predictions(std::span<const Interaction> records, std::span<const double> scores) {
  if (records.size() != scores.size()) throw InvalidInput("predictions: records and scores differ in length");
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < records.size(); ++i) {
    out += std::to_string(records[i].user);
    out += '\t';
    out += std::to_string(records[i].item);
    out += '\t';
    std::snprintf(buf, sizeof buf, "%.9f", scores[i]);
    out += buf;
    out += '\n';
  }
  return out;
}

Checkpoint recommender_checkpoint(const RecommenderModel& model, const RecommenderConfig& config,
                                  std::uint64_t seed, const std::string& ccm_hash, const SocialGraph* graph,
                                  const EntityEmbeddingTable* table) {
  Checkpoint ckpt;
  ckpt.set_meta("kind", "recommender");
  ckpt.set_meta("variant", std::string(to_string(model.variant)));
  ckpt.set_meta("seed", std::to_string(seed));
  ckpt.set_meta("ccm_hash", ccm_hash.empty() ? "none" : ccm_hash);
  ckpt.set_meta("behavior_dim", std::to_string(config.behavior_dim));
  ckpt.set_meta("epochs", std::to_string(config.epochs));
  ckpt.set_meta("batch_size", std::to_string(config.batch_size));
  ckpt.set_meta("learning_rate", format_double(config.learning_rate));
  ckpt.put("index.users", ids_tensor(model.users));
  ckpt.put("index.items", ids_tensor(model.items));
  std::vector<std::uint64_t> cats(model.item_category.begin(), model.item_category.end());
  ckpt.put("index.item_category", ids_tensor(cats));
  ckpt.put("behavior.users", model.behavior.users);
  ckpt.put("behavior.items", model.behavior.items);
  ckpt.put("behavior.categories", model.behavior.categories);
  store_net(ckpt, "h", model.towers.user);
  store_net(ckpt, "g", model.towers.item);
  if (!model.attention.empty()) store_net(ckpt, "q", model.attention);
  if (graph && table) store_entity_table(ckpt, *graph, *table);
  return ckpt;
}

RecommenderModel load_recommender(const Checkpoint& ckpt) {
  if (ckpt.meta("kind") != std::optional<std::string>("recommender")) {
    throw DataError("not a recommender checkpoint");
  }
  RecommenderModel model;
  model.variant = parse_variant(ckpt.require_meta("variant"));
  model.users = tensor_ids(ckpt.tensor("index.users"));
  model.items = tensor_ids(ckpt.tensor("index.items"));
  for (auto c : tensor_ids(ckpt.tensor("index.item_category"))) model.item_category.push_back(c);
  model.behavior.users = ckpt.tensor("behavior.users");
  model.behavior.items = ckpt.tensor("behavior.items");
  model.behavior.categories = ckpt.tensor("behavior.categories");
  model.towers.user = load_net(ckpt, "h");
  model.towers.item = load_net(ckpt, "g");
  if (uses_attention(model.variant)) model.attention = load_net(ckpt, "q");
  if (model.behavior.users.rows() != model.users.size() || model.behavior.items.rows() != model.items.size() ||
      model.item_category.size() != model.items.size()) {
    throw DataError("recommender checkpoint: index and table sizes disagree");
  }
  return model;
}

}  // namespace socialrec
