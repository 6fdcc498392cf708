#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "socialrec/checkpoint.hpp"
#include "socialrec/dense_net.hpp"
#include "socialrec/rng.hpp"
#include "socialrec/social_graph.hpp"
#include "socialrec/tensor.hpp"

namespace socialrec {

/// Which users drive the competitive cluster layer.
enum class ClusterPopulation {
  kAllUsers,           // every user in the social graph
  kFullRelationUsers,  // only users holding every relation type
};

std::string to_string(ClusterPopulation population);
ClusterPopulation parse_cluster_population(std::string_view text);

/// Where the prototypes start.
enum class PrototypeInit {
  kNormal,  // Normal(0, prototype_init_scale^2) entries
  kSample,  // projections of randomly drawn cluster-layer users, plus that same noise
  kMean,    // mean projection of the cluster-layer users, plus that same noise
};

std::string to_string(PrototypeInit init);
PrototypeInit parse_prototype_init(std::string_view text);

struct CcmConfig {
  std::size_t groups = 32;          // m
  std::size_t relation_dim = 16;    // d_l, identical for every relation
  std::size_t hidden = 64;          // projection net hidden width
  std::size_t cluster_epochs = 30;
  std::size_t calibrator_epochs = 20;
  double eta_start = 0.5;
  double eta_end = 0.01;
  double learning_rate = 1e-3;
  double temperature = 1.0;
  double mask_fraction = 0.5;
  std::size_t min_group_size = 0;   // 0 selects auto_min_group_size over the groups still occupied
  bool merge_recompute = false;     // move absorbing prototypes to their member mean
  double calibrator_holdout = 0.2;  // share of full-relation users kept out of calibration
  double entity_init_scale = 0.5;
  double prototype_init_scale = 0.01;
  PrototypeInit prototype_init = PrototypeInit::kMean;
  double cluster_net_learning_rate = 0.0;  // f's rate in the cluster layer; entities use learning_rate
  ClusterPopulation cluster_population = ClusterPopulation::kFullRelationUsers;
};

/// Users driving the cluster layer, ascending by index.
std::vector<std::size_t> cluster_layer_users(const SocialGraph& graph, ClusterPopulation population);

/// max(5, |U| / (4m)).
std::size_t auto_min_group_size(std::size_t user_count, std::size_t groups);

/// argmin_j ||W_j - z||, lowest index on ties.
std::size_t assign_group(const Tensor2& prototypes, std::span<const double> z);

/// Winner-take-all pull: W_j += eta * (z - W_j). eta must lie in [0, 1].
void prototype_update(Tensor2& prototypes, std::size_t winner, std::span<const double> z, double eta);

/// softmax_j(-||W_j - z||^2 / tau) for an already projected z.
std::vector<double> group_distribution(const Tensor2& prototypes, std::span<const double> z,
                                       double temperature);

/// softmax_j(-||W_j - net(x)||^2 / tau).
std::vector<double> assignment_distribution(const DenseNet& net, const Tensor2& prototypes,
                                            std::span<const double> x, double temperature);

/// KL(p || q) between a fixed target p and q = group_distribution(W, z, tau), together with
/// its gradient with respect to z.
struct CalibrationLoss {
  double kl = 0.0;
  std::vector<double> d_z;
};
CalibrationLoss calibration_loss(std::span<const double> target, const Tensor2& prototypes,
                                 std::span<const double> z, double temperature);

/// Projection net f / k: d -> hidden -> d, leaky-relu hidden layer, linear output.
DenseNet make_projection_net(std::size_t dim, std::size_t hidden, Rng& rng);

struct ClusterReport {
  std::vector<double> epoch_loss;  // mean ||W_j - f(X_u)||^2 measured at assignment time
  std::size_t population = 0;
  std::size_t live_prototypes = 0;  // prototypes kept after training
};

/// Alternates, per user: competitive prototype update, then an Adam step on f and the
/// entity table against ||W_j - f(X_u)||^2 with W held fixed.
ClusterReport train_cluster_layer(const SocialGraph& graph, EntityEmbeddingTable& table, DenseNet& f,
                                  Tensor2& prototypes, const CcmConfig& config, Rng& rng);

/// Keeps the prototypes that win at least one of `users` under `net`, in their original order.
Tensor2 live_prototypes(const SocialGraph& graph, const EntityEmbeddingTable& table, const DenseNet& net,
                        const Tensor2& prototypes, std::span<const std::size_t> users);

struct CalibratorReport {
  std::vector<double> epoch_kl;
  double min_step_kl = 0.0;
  std::vector<std::size_t> train_users;
  std::vector<std::size_t> holdout_users;
  double student_agreement = 0.0;         // student on masked input vs teacher on full input
  double teacher_masked_agreement = 0.0;  // teacher on masked input vs teacher on full input
};

/// Distils the frozen teacher into `student` on masked inputs of full-relation users.
/// `rng` drives the split, shuffles and training masks; `eval_rng` the held-out masks.
CalibratorReport train_calibrator(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                  const DenseNet& teacher, const Tensor2& prototypes,
                                  DenseNet& student, const CcmConfig& config, Rng& rng,
                                  Rng& eval_rng);

struct MergeResult {
  std::vector<std::size_t> assignment;  // dense group ids
  Tensor2 prototypes;                   // one row per surviving group
  std::size_t rounds = 0;
  std::size_t min_group_size = 0;  // threshold of the last round
};

/// Per round, dissolves every group below the threshold (keeping the largest if all are) and
/// moves their members to the nearest surviving prototype, until every group has >= the
/// threshold or one group is left. The threshold is `min_group_size`, or when that is 0,
/// auto_min_group_size re-evaluated each round over the occupied groups. With `recompute`,
/// prototypes that absorbed members move to the mean of their members' `projected` rows.
MergeResult merge_small_groups(std::span<const std::size_t> assignment, const Tensor2& prototypes,
                               const Tensor2& projected, std::size_t min_group_size,
                               bool recompute = false);

/// user -> interest group, sorted by user id, dense group ids.
class GroupAssignmentTable {
 public:
  GroupAssignmentTable() = default;
  GroupAssignmentTable(std::vector<UserId> users, std::vector<std::size_t> groups);

  std::size_t size() const noexcept { return users_.size(); }
  std::size_t group_count() const noexcept { return group_count_; }
  const std::vector<UserId>& users() const noexcept { return users_; }
  const std::vector<std::size_t>& groups() const noexcept { return groups_; }
  std::optional<std::size_t> group_of(UserId user) const;
  std::vector<std::size_t> sizes() const;

  std::string serialize() const;
  static GroupAssignmentTable parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static GroupAssignmentTable load(const std::filesystem::path& path);

  friend bool operator==(const GroupAssignmentTable&, const GroupAssignmentTable&) = default;

 private:
  std::vector<UserId> users_;
  std::vector<std::size_t> groups_;
  std::size_t group_count_ = 0;
};

/// Projects every user with `net` and assigns the nearest prototype. Prototypes that
/// receive no user are dropped and ids re-densified; `used_prototypes` gets the kept rows.
GroupAssignmentTable final_assignment(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                      const DenseNet& net, const Tensor2& prototypes,
                                      Tensor2* used_prototypes = nullptr);

/// Trained cluster + calibrator state.
struct CcmModel {
  CcmConfig config;
  std::uint64_t seed = 0;
  EntityEmbeddingTable table;
  DenseNet teacher;
  DenseNet student;
  Tensor2 prototypes;
  bool has_student = false;
  ClusterReport cluster;
  std::optional<CalibratorReport> calibrator;
};

/// Stage toggles used by the ablations.
struct CcmStages {
  bool calibrate = true;
  bool merge = true;
};

struct Grouping {
  GroupAssignmentTable assignments;
  Tensor2 prototypes;  // prototypes used for the final assignment
  CcmStages stages;
  std::size_t groups_before_merge = 0;
  std::size_t min_group_size = 0;  // final merge threshold; 0 when merge is off
};

CcmModel train_ccm(const SocialGraph& graph, const CcmConfig& config, std::uint64_t seed,
                   bool with_calibrator = true);

Grouping group_users(const SocialGraph& graph, const CcmModel& model, CcmStages stages);

/// Entity rows are keyed by entity id, so a table reloads against any graph over the same
/// relations; entities unknown to the checkpoint get zero rows.
void store_entity_table(Checkpoint& ckpt, const SocialGraph& graph, const EntityEmbeddingTable& table);
EntityEmbeddingTable load_entity_table(const Checkpoint& ckpt, const SocialGraph& graph);

Checkpoint ccm_checkpoint(const SocialGraph& graph, const CcmModel& model, const Grouping& grouping);

/// The parts of a CCM checkpoint needed to assign users.
struct CcmAssigner {
  EntityEmbeddingTable table;
  DenseNet net;
  Tensor2 prototypes;
  CcmStages stages;
  std::map<std::string, std::string, std::less<>> meta;
};
CcmAssigner load_ccm_assigner(const Checkpoint& ckpt, const SocialGraph& graph);

}  // namespace socialrec
