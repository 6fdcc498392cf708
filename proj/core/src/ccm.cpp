#include "socialrec/ccm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "socialrec/adam.hpp"
#include "socialrec/error.hpp"
#include "socialrec/losses.hpp"

namespace socialrec {

std::string to_string(ClusterPopulation population) {
  return population == ClusterPopulation::kAllUsers ? "all" : "full-relation";
}

ClusterPopulation parse_cluster_population(std::string_view text) {
  if (text == "all") return ClusterPopulation::kAllUsers;
  if (text == "full-relation") return ClusterPopulation::kFullRelationUsers;
  throw ConfigError("cluster population must be 'all' or 'full-relation', got '" +
                    std::string(text) + "'");
}

std::string to_string(PrototypeInit init) {
  switch (init) {
    case PrototypeInit::kNormal: return "normal";
    case PrototypeInit::kSample: return "sample";
    case PrototypeInit::kMean: return "mean";
  }
  return "normal";
}

PrototypeInit parse_prototype_init(std::string_view text) {
  if (text == "normal") return PrototypeInit::kNormal;
  if (text == "sample") return PrototypeInit::kSample;
  if (text == "mean") return PrototypeInit::kMean;
  throw ConfigError("prototype init must be 'normal', 'sample' or 'mean', got '" + std::string(text) + "'");
}

std::vector<std::size_t> cluster_layer_users(const SocialGraph& graph, ClusterPopulation population) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    if (population == ClusterPopulation::kAllUsers || graph.has_all_relations(u)) out.push_back(u);
  }
  return out;
}

std::size_t auto_min_group_size(std::size_t user_count, std::size_t groups) {
  return std::max<std::size_t>(5, user_count / (4 * std::max<std::size_t>(groups, 1)));
}

std::size_t assign_group(const Tensor2& prototypes, std::span<const double> z) {
  if (prototypes.rows() == 0) throw InvalidInput("assign_group: no prototypes");
  if (z.size() != prototypes.cols()) throw InvalidInput("assign_group: dimension mismatch");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < prototypes.rows(); ++j) {
    const double d = squared_distance(prototypes.row(j), z);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

void prototype_update(Tensor2& prototypes, std::size_t winner, std::span<const double> z, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidInput("prototype_update: eta must lie in [0, 1]");
  if (winner >= prototypes.rows() || z.size() != prototypes.cols()) {
    throw InvalidInput("prototype_update: winner or dimension out of range");
  }
  auto row = prototypes.row(winner);
  for (std::size_t i = 0; i < row.size(); ++i) row[i] += eta * (z[i] - row[i]);
}

std::vector<double> group_distribution(const Tensor2& prototypes, std::span<const double> z,
                                       double temperature) {
  if (!(temperature > 0.0)) throw InvalidInput("assignment distribution: tau must be positive");
  if (z.size() != prototypes.cols()) throw InvalidInput("assignment distribution: dimension mismatch");
  std::vector<double> logits(prototypes.rows());
  for (std::size_t j = 0; j < logits.size(); ++j) logits[j] = -squared_distance(prototypes.row(j), z);
  return softmax(logits, temperature);
}

std::vector<double> assignment_distribution(const DenseNet& net, const Tensor2& prototypes,
                                            std::span<const double> x, double temperature) {
  if (!(temperature > 0.0)) throw InvalidInput("assignment distribution: tau must be positive");
  return group_distribution(prototypes, forward(net, x), temperature);
}

CalibrationLoss calibration_loss(std::span<const double> target, const Tensor2& prototypes,
                                 std::span<const double> z, double temperature) {
  const auto q = group_distribution(prototypes, z, temperature);
  if (target.size() != q.size()) throw InvalidInput("calibration loss: distribution length mismatch");
  CalibrationLoss out;
  out.kl = kl_divergence(target, q);
  // d KL / d logit_j = q_j - p_j, logit_j = -||z - W_j||^2 / tau.
  out.d_z.assign(z.size(), 0.0);
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double coeff = -2.0 * (q[j] - target[j]) / temperature;
    if (coeff == 0.0) continue;
    const auto w = prototypes.row(j);
    for (std::size_t i = 0; i < z.size(); ++i) out.d_z[i] += coeff * (z[i] - w[i]);
  }
  return out;
}

DenseNet make_projection_net(std::size_t dim, std::size_t hidden, Rng& rng) {
  const std::size_t dims[] = {dim, hidden, dim};
  return DenseNet::make(dims, Activation::kLeakyRelu, Activation::kIdentity, rng);
}

namespace {

std::vector<ParamBlock> net_blocks(DenseNet& net, const DenseNetGrad& grad) {
  std::vector<ParamBlock> blocks;
  auto& layers = net.mutable_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    blocks.push_back({layers[i].weight.values(), grad.weight[i].values()});
    blocks.push_back({layers[i].bias, grad.bias[i]});
  }
  return blocks;
}

std::vector<std::size_t> full_relation_users(const SocialGraph& graph) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    if (graph.has_all_relations(u)) out.push_back(u);
  }
  return out;
}

void unique_rows(std::vector<std::size_t>& rows) {
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
}

}  // namespace

ClusterReport train_cluster_layer(const SocialGraph& graph, EntityEmbeddingTable& table, DenseNet& f,
                                  Tensor2& prototypes, const CcmConfig& config, Rng& rng) {
  auto population = cluster_layer_users(graph, config.cluster_population);
  if (config.groups == 0) throw ConfigError("cluster layer: group count must be >= 1");
  if (config.groups > graph.user_count()) {
    throw ConfigError("cluster layer: group count " + std::to_string(config.groups) +
                      " exceeds user count " + std::to_string(graph.user_count()));
  }
  if (population.empty()) throw StageError("cluster", "no users available for the cluster layer");
  if (f.input_dim() != table.layout().total() || f.output_dim() != prototypes.cols()) {
    throw InvalidInput("cluster layer: projection net does not match embedding/prototype width");
  }

  ClusterReport report;
  report.population = population.size();
  const auto& layout = table.layout();
  const std::size_t relations = graph.relation_count();

  DenseNetGrad f_grad(f);
  std::vector<Tensor2> entity_grad;
  for (RelationId l = 0; l < relations; ++l) {
    entity_grad.emplace_back(table.relation(l).rows(), table.relation(l).cols());
  }
  std::vector<std::vector<std::size_t>> touched(relations);
  AdamState net_adam(AdamConfig{config.cluster_net_learning_rate});
  AdamState entity_adam(AdamConfig{config.learning_rate});
  ForwardCache cache;
  std::vector<double> d_z(prototypes.cols());

  for (std::size_t epoch = 0; epoch < config.cluster_epochs; ++epoch) {
    const double progress = config.cluster_epochs > 1
                                ? static_cast<double>(epoch) / static_cast<double>(config.cluster_epochs - 1)
                                : 0.0;
    const double eta = config.eta_start + (config.eta_end - config.eta_start) * progress;
    std::shuffle(population.begin(), population.end(), rng);
    double loss_sum = 0.0;

    for (std::size_t u : population) {
      const auto x = social_embedding(graph, table, u);
      forward(f, x, cache);
      const auto z = cache.output();
      const std::size_t winner = assign_group(prototypes, z);
      loss_sum += squared_distance(prototypes.row(winner), z);
      prototype_update(prototypes, winner, z, eta);

      const auto w = prototypes.row(winner);
      for (std::size_t i = 0; i < z.size(); ++i) d_z[i] = 2.0 * (z[i] - w[i]);
      f_grad.zero();
      const auto d_x = backward(f, cache, d_z, f_grad);
      for (auto& t : touched) t.clear();
      accumulate_entity_gradient(graph, u, d_x, layout, entity_grad, touched);

      if (config.cluster_net_learning_rate > 0.0) adam_step(net_adam, net_blocks(f, f_grad));
      std::vector<ParamBlock> blocks;
      for (RelationId l = 0; l < relations; ++l) {
        unique_rows(touched[l]);
        blocks.push_back({table.relation(l).values(), entity_grad[l].values(), layout.dim(l), touched[l]});
      }
      adam_step(entity_adam, blocks);
      for (RelationId l = 0; l < relations; ++l) {
        for (auto row : touched[l]) std::fill(entity_grad[l].row(row).begin(), entity_grad[l].row(row).end(), 0.0);
      }
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(population.size()));
  }
  return report;
}

CalibratorReport train_calibrator(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                  const DenseNet& teacher, const Tensor2& prototypes,
                                  DenseNet& student, const CcmConfig& config, Rng& rng,
                                  Rng& eval_rng) {
  auto full = full_relation_users(graph);
  if (full.empty()) {
    throw StageError("calibrator",
                     "no user holds every relation type; raise the relation presence probability "
                     "or the user count when generating data");
  }
  if (student.input_dim() != teacher.input_dim() || student.output_dim() != teacher.output_dim()) {
    throw InvalidInput("calibrator: student and teacher shapes differ");
  }
  CalibratorReport report;
  std::shuffle(full.begin(), full.end(), rng);
  std::size_t holdout = static_cast<std::size_t>(config.calibrator_holdout * static_cast<double>(full.size()));
  holdout = std::min(holdout, full.size() - 1);
  report.holdout_users.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(holdout));
  report.train_users.assign(full.begin() + static_cast<std::ptrdiff_t>(holdout), full.end());
  std::sort(report.holdout_users.begin(), report.holdout_users.end());
  std::sort(report.train_users.begin(), report.train_users.end());

  const auto& layout = table.layout();
  const double tau = config.temperature;
  std::vector<std::vector<double>> inputs(graph.user_count());
  std::vector<std::vector<double>> targets(graph.user_count());
  for (auto u : full) {
    inputs[u] = social_embedding(graph, table, u);
    targets[u] = assignment_distribution(teacher, prototypes, inputs[u], tau);
  }

  DenseNetGrad grad(student);
  AdamState adam(AdamConfig{config.learning_rate});
  ForwardCache cache;
  auto order = report.train_users;
  report.min_step_kl = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < config.calibrator_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double kl_sum = 0.0;
    for (auto u : order) {
      const auto present = graph.present_relations(u);
      const auto masked = mask_relations(inputs[u], layout, present, config.mask_fraction, rng);
      forward(student, masked, cache);
      const auto loss = calibration_loss(targets[u], prototypes, cache.output(), tau);
      kl_sum += loss.kl;
      report.min_step_kl = std::min(report.min_step_kl, loss.kl);
      grad.zero();
      backward(student, cache, loss.d_z, grad);
      const auto blocks = net_blocks(student, grad);
      adam_step(adam, blocks);
    }
    report.epoch_kl.push_back(kl_sum / static_cast<double>(order.size()));
  }
  if (report.epoch_kl.empty()) report.min_step_kl = 0.0;

  const auto& eval_users = report.holdout_users.empty() ? report.train_users : report.holdout_users;
  std::size_t student_hits = 0;
  std::size_t teacher_hits = 0;
  for (auto u : eval_users) {
    const auto present = graph.present_relations(u);
    const auto masked = mask_relations(inputs[u], layout, present, config.mask_fraction, eval_rng);
    const auto reference = assign_group(prototypes, forward(teacher, inputs[u]));
    if (assign_group(prototypes, forward(student, masked)) == reference) ++student_hits;
    if (assign_group(prototypes, forward(teacher, masked)) == reference) ++teacher_hits;
  }
  const double n = static_cast<double>(eval_users.size());
  report.student_agreement = static_cast<double>(student_hits) / n;
  report.teacher_masked_agreement = static_cast<double>(teacher_hits) / n;
  return report;
}

MergeResult merge_small_groups(std::span<const std::size_t> assignment, const Tensor2& prototypes,
                               const Tensor2& projected, std::size_t min_group_size,
                               bool recompute) {
  const std::size_t n = assignment.size();
  const std::size_t m = prototypes.rows();
  if (min_group_size > n) {
    throw ConfigError("merge: min_group_size " + std::to_string(min_group_size) +
                      " exceeds user count " + std::to_string(n));
  }
  if (m == 0) throw InvalidInput("merge: no prototypes");
  if (projected.rows() != n || projected.cols() != prototypes.cols()) {
    throw InvalidInput("merge: projected vectors do not match assignment/prototype shape");
  }
  for (auto g : assignment) {
    if (g >= m) throw InvalidInput("merge: assignment references unknown group");
  }

  std::vector<std::size_t> groups(assignment.begin(), assignment.end());
  Tensor2 w = prototypes;
  std::vector<bool> alive(m, true);
  std::size_t alive_count = m;
  MergeResult result;
  if (min_group_size > 0) {
    result.min_group_size = min_group_size;
  } else {
    std::vector<bool> seen(m, false);
    for (auto g : groups) seen[g] = true;
    result.min_group_size = auto_min_group_size(n, static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true)));
  }

  while (alive_count > 1) {
    std::vector<std::size_t> sizes(m, 0);
    for (auto g : groups) ++sizes[g];
    std::size_t occupied = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (alive[j] && sizes[j] > 0) ++occupied;
    }
    const std::size_t threshold =
        min_group_size > 0 ? min_group_size : auto_min_group_size(n, occupied);
    result.min_group_size = threshold;
    std::vector<bool> dissolve(m, false);
    std::optional<std::size_t> largest_alive;
    std::size_t dissolving = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!alive[j]) continue;
      if (!largest_alive || sizes[j] > sizes[*largest_alive]) largest_alive = j;
      if (sizes[j] < threshold) {
        dissolve[j] = true;
        ++dissolving;
      }
    }
    if (dissolving == 0) break;
    // Every group undersized: the largest one is what remains.
    if (dissolving == alive_count) {
      dissolve[*largest_alive] = false;
      --dissolving;
    }

    for (std::size_t j = 0; j < m; ++j) {
      if (dissolve[j]) alive[j] = false;
    }
    alive_count -= dissolving;
    ++result.rounds;
    std::vector<bool> absorbed(m, false);
    for (std::size_t u = 0; u < n; ++u) {
      if (!dissolve[groups[u]]) continue;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        if (!alive[j]) continue;
        const double d = squared_distance(w.row(j), projected.row(u));
        if (d < best_d) {
          best_d = d;
          groups[u] = j;
        }
      }
      absorbed[groups[u]] = true;
    }

    if (!recompute) continue;
    std::vector<std::size_t> counts(m, 0);
    Tensor2 sums(m, w.cols());
    for (std::size_t u = 0; u < n; ++u) {
      ++counts[groups[u]];
      axpy(1.0, projected.row(u), sums.row(groups[u]));
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (!absorbed[j]) continue;
      const double inv = 1.0 / static_cast<double>(counts[j]);
      auto row = w.row(j);
      const auto s = sums.row(j);
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = s[i] * inv;
    }
  }

  std::vector<std::size_t> remap(m, 0);
  std::size_t next = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (alive[j]) remap[j] = next++;
  }
  result.prototypes = Tensor2(next, w.cols());
  for (std::size_t j = 0; j < m; ++j) {
    if (!alive[j]) continue;
    std::copy(w.row(j).begin(), w.row(j).end(), result.prototypes.row(remap[j]).begin());
  }
  result.assignment.resize(n);
  for (std::size_t u = 0; u < n; ++u) result.assignment[u] = remap[groups[u]];
  return result;
}

GroupAssignmentTable::GroupAssignmentTable(std::vector<UserId> users, std::vector<std::size_t> groups)
    : users_(std::move(users)), groups_(std::move(groups)) {
  if (users_.size() != groups_.size()) throw InvalidInput("assignment table: length mismatch");
  std::vector<std::size_t> order(users_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return users_[a] < users_[b]; });
  std::vector<UserId> su;
  std::vector<std::size_t> sg;
  for (auto i : order) {
    if (!su.empty() && su.back() == users_[i]) throw InvalidInput("assignment table: duplicate user");
    su.push_back(users_[i]);
    sg.push_back(groups_[i]);
  }
  users_ = std::move(su);
  groups_ = std::move(sg);
  group_count_ = groups_.empty() ? 0 : *std::max_element(groups_.begin(), groups_.end()) + 1;
  std::vector<bool> used(group_count_, false);
  for (auto g : groups_) used[g] = true;
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw InvalidInput("assignment table: group ids are not dense");
  }
}

std::optional<std::size_t> GroupAssignmentTable::group_of(UserId user) const {
  auto it = std::lower_bound(users_.begin(), users_.end(), user);
  if (it == users_.end() || *it != user) return std::nullopt;
  return groups_[static_cast<std::size_t>(it - users_.begin())];
}

std::vector<std::size_t> GroupAssignmentTable::sizes() const {
  std::vector<std::size_t> out(group_count_, 0);
  for (auto g : groups_) ++out[g];
  return out;
}

std::string GroupAssignmentTable::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < users_.size(); ++i) {
    out += std::to_string(users_[i]) + '\t' + std::to_string(groups_[i]) + '\n';
  }
  return out;
}

GroupAssignmentTable GroupAssignmentTable::parse(std::string_view text) {
  std::vector<UserId> users;
  std::vector<std::size_t> groups;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    UserId user = 0;
    std::size_t group = 0;
    const auto a = line.substr(0, tab);
    const auto b = tab == std::string_view::npos ? std::string_view{} : line.substr(tab + 1);
    auto r1 = std::from_chars(a.data(), a.data() + a.size(), user);
    auto r2 = std::from_chars(b.data(), b.data() + b.size(), group);
    if (tab == std::string_view::npos || r1.ec != std::errc() || r2.ec != std::errc() ||
        r1.ptr != a.data() + a.size() || r2.ptr != b.data() + b.size()) {
      throw DataError("assignment file line " + std::to_string(line_no) + ": malformed");
    }
    users.push_back(user);
    groups.push_back(group);
  }
  try {
    return GroupAssignmentTable(std::move(users), std::move(groups));
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
}

void GroupAssignmentTable::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

GroupAssignmentTable GroupAssignmentTable::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

GroupAssignmentTable final_assignment(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                      const DenseNet& net, const Tensor2& prototypes,
                                      Tensor2* used_prototypes) {
  std::vector<std::size_t> raw(graph.user_count());
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    raw[u] = assign_group(prototypes, forward(net, social_embedding(graph, table, u)));
  }
  std::vector<bool> used(prototypes.rows(), false);
  for (auto g : raw) used[g] = true;
  std::vector<std::size_t> remap(prototypes.rows(), 0);
  std::size_t next = 0;
  for (std::size_t j = 0; j < used.size(); ++j) {
    if (used[j]) remap[j] = next++;
  }
  if (used_prototypes) {
    *used_prototypes = Tensor2(next, prototypes.cols());
    for (std::size_t j = 0; j < used.size(); ++j) {
      if (!used[j]) continue;
      std::copy(prototypes.row(j).begin(), prototypes.row(j).end(), used_prototypes->row(remap[j]).begin());
    }
  }
  for (auto& g : raw) g = remap[g];
  return GroupAssignmentTable(graph.users(), std::move(raw));
}

Tensor2 live_prototypes(const SocialGraph& graph, const EntityEmbeddingTable& table, const DenseNet& net,
                        const Tensor2& prototypes, std::span<const std::size_t> users) {
  std::vector<bool> won(prototypes.rows(), false);
  for (auto u : users) won[assign_group(prototypes, forward(net, social_embedding(graph, table, u)))] = true;
  Tensor2 out(static_cast<std::size_t>(std::count(won.begin(), won.end(), true)), prototypes.cols());
  std::size_t next = 0;
  for (std::size_t j = 0; j < won.size(); ++j) {
    if (!won[j]) continue;
    std::copy(prototypes.row(j).begin(), prototypes.row(j).end(), out.row(next++).begin());
  }
  return out;
}

CcmModel train_ccm(const SocialGraph& graph, const CcmConfig& config, std::uint64_t seed,
                   bool with_calibrator) {
  CcmModel model;
  model.config = config;
  model.seed = seed;
  const std::size_t relations = graph.relation_count();
  const std::vector<std::size_t> dims(relations, config.relation_dim);
  const std::size_t d = config.relation_dim * relations;

  auto init_rng = make_rng(seed, "ccm.init");
  model.table = EntityEmbeddingTable::random(graph, dims, config.entity_init_scale, init_rng);
  model.teacher = make_projection_net(d, config.hidden, init_rng);
  model.prototypes = Tensor2(config.groups, d);
  std::normal_distribution<double> normal(0.0, config.prototype_init_scale);
  for (double& v : model.prototypes.values()) v = normal(init_rng);
  if (config.prototype_init == PrototypeInit::kSample) {
    auto pool = cluster_layer_users(graph, config.cluster_population);
    std::shuffle(pool.begin(), pool.end(), init_rng);
    for (std::size_t j = 0; j < config.groups && !pool.empty(); ++j) {
      const auto z = forward(model.teacher, social_embedding(graph, model.table, pool[j % pool.size()]));
      axpy(1.0, z, model.prototypes.row(j));
    }
  } else if (config.prototype_init == PrototypeInit::kMean) {
    const auto pool = cluster_layer_users(graph, config.cluster_population);
    std::vector<double> mean(d, 0.0);
    for (auto u : pool) axpy(1.0, forward(model.teacher, social_embedding(graph, model.table, u)), mean);
    for (double& v : mean) v /= static_cast<double>(std::max<std::size_t>(pool.size(), 1));
    for (std::size_t j = 0; j < config.groups; ++j) axpy(1.0, mean, model.prototypes.row(j));
  }

  auto cluster_rng = make_rng(seed, "ccm.cluster");
  model.cluster = train_cluster_layer(graph, model.table, model.teacher, model.prototypes, config, cluster_rng);
  // Prototypes that never win are not groups; left in place they sit near the origin and
  // collect low-norm projections of sparse users.
  model.prototypes = live_prototypes(graph, model.table, model.teacher, model.prototypes,
                                     cluster_layer_users(graph, config.cluster_population));
  model.cluster.live_prototypes = model.prototypes.rows();

  if (with_calibrator) {
    model.student = model.teacher;
    auto calib_rng = make_rng(seed, "ccm.calibrator");
    auto eval_rng = make_rng(seed, "ccm.calibrator.eval");
    model.calibrator = train_calibrator(graph, model.table, model.teacher, model.prototypes,
                                        model.student, config, calib_rng, eval_rng);
    model.has_student = true;
  }
  return model;
}

Grouping group_users(const SocialGraph& graph, const CcmModel& model, CcmStages stages) {
  if (stages.calibrate && !model.has_student) {
    throw StageError("assign", "calibrated grouping requested but no student was trained");
  }
  const DenseNet& net = stages.calibrate ? model.student : model.teacher;
  Grouping out;
  out.stages = stages;

  Tensor2 projected(graph.user_count(), model.prototypes.cols());
  std::vector<std::size_t> initial(graph.user_count());
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    const auto z = forward(net, social_embedding(graph, model.table, u));
    std::copy(z.begin(), z.end(), projected.row(u).begin());
    initial[u] = assign_group(model.prototypes, z);
  }
  {
    auto sorted = initial;
    std::sort(sorted.begin(), sorted.end());
    out.groups_before_merge = static_cast<std::size_t>(
        std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  }

  Tensor2 prototypes = model.prototypes;
  if (stages.merge) {
    auto merged = merge_small_groups(initial, model.prototypes, projected, model.config.min_group_size,
                                     model.config.merge_recompute);
    prototypes = std::move(merged.prototypes);
    out.min_group_size = merged.min_group_size;
  }
  out.assignments = final_assignment(graph, model.table, net, prototypes, &out.prototypes);
  return out;
}

void store_entity_table(Checkpoint& ckpt, const SocialGraph& graph, const EntityEmbeddingTable& table) {
  for (RelationId l = 0; l < graph.relation_count(); ++l) {
    const std::string base = "entities." + graph.schema().name(l);
    Tensor2 ids(1, graph.entity_universe(l));
    for (std::size_t e = 0; e < graph.entity_universe(l); ++e) {
      ids(0, e) = static_cast<double>(graph.entity_id(l, e));
    }
    ckpt.put(base + ".ids", std::move(ids));
    ckpt.put(base + ".embedding", table.relation(l));
  }
}

EntityEmbeddingTable load_entity_table(const Checkpoint& ckpt, const SocialGraph& graph) {
  std::vector<Tensor2> tables;
  for (RelationId l = 0; l < graph.relation_count(); ++l) {
    const std::string base = "entities." + graph.schema().name(l);
    const auto& ids = ckpt.tensor(base + ".ids");
    const auto& emb = ckpt.tensor(base + ".embedding");
    if (ids.size() != emb.rows()) throw DataError("checkpoint: entity ids do not match embedding rows");
    Tensor2 t(graph.entity_universe(l), emb.cols());
    for (std::size_t r = 0; r < emb.rows(); ++r) {
      const auto e = graph.find_entity(l, static_cast<EntityId>(ids.values()[r]));
      if (!e) continue;
      std::copy(emb.row(r).begin(), emb.row(r).end(), t.row(*e).begin());
    }
    tables.push_back(std::move(t));
  }
  return EntityEmbeddingTable(std::move(tables));
}

Checkpoint ccm_checkpoint(const SocialGraph& graph, const CcmModel& model, const Grouping& grouping) {
  Checkpoint ckpt;
  const auto& c = model.config;
  ckpt.set_meta("kind", "ccm");
  ckpt.set_meta("groups", std::to_string(c.groups));
  ckpt.set_meta("live_groups", std::to_string(model.prototypes.rows()));
  ckpt.set_meta("final_groups", std::to_string(grouping.assignments.group_count()));
  ckpt.set_meta("temperature", format_double(c.temperature));
  ckpt.set_meta("mask_fraction", format_double(c.mask_fraction));
  ckpt.set_meta("seed", std::to_string(model.seed));
  ckpt.set_meta("cluster_epochs", std::to_string(c.cluster_epochs));
  ckpt.set_meta("calibrator_epochs", std::to_string(c.calibrator_epochs));
  ckpt.set_meta("min_group_size", std::to_string(grouping.min_group_size));
  ckpt.set_meta("merge_recompute", c.merge_recompute ? "1" : "0");
  ckpt.set_meta("cluster_population", to_string(c.cluster_population));
  ckpt.set_meta("prototype_init", to_string(c.prototype_init));
  ckpt.set_meta("calibrated", grouping.stages.calibrate ? "1" : "0");
  ckpt.set_meta("merged", grouping.stages.merge ? "1" : "0");
  ckpt.set_meta("relations", [&] {
    std::string s;
    for (const auto& n : graph.schema().names()) s += (s.empty() ? "" : ",") + n;
    return s;
  }());
  store_entity_table(ckpt, graph, model.table);
  store_net(ckpt, "f", model.teacher);
  if (model.has_student) store_net(ckpt, "k", model.student);
  ckpt.put("W", model.prototypes);
  ckpt.put("W_final", grouping.prototypes);
  return ckpt;
}

CcmAssigner load_ccm_assigner(const Checkpoint& ckpt, const SocialGraph& graph) {
  if (ckpt.meta("kind") != std::optional<std::string>("ccm")) throw DataError("not a CCM checkpoint");
  CcmAssigner out;
  out.stages.calibrate = ckpt.require_meta("calibrated") == "1";
  out.stages.merge = ckpt.require_meta("merged") == "1";
  out.table = load_entity_table(ckpt, graph);
  out.net = load_net(ckpt, out.stages.calibrate ? "k" : "f");
  out.prototypes = ckpt.tensor("W_final");
  out.meta = ckpt.all_meta();
  return out;
}

}  // namespace socialrec
