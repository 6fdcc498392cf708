#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "socialrec/rng.hpp"
#include "socialrec/tensor.hpp"

namespace socialrec {

using UserId = std::uint64_t;
using EntityId = std::uint64_t;
using RelationId = std::size_t;

/// Ordered, uniquely named relation types; ids are the positions 0..L-1.
class RelationSchema {
 public:
  RelationSchema() = default;
  explicit RelationSchema(std::vector<std::string> names);

  /// star, movie, friend, uploader.
  static RelationSchema defaults();

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(RelationId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::optional<RelationId> find(std::string_view name) const;

  friend bool operator==(const RelationSchema&, const RelationSchema&) = default;

 private:
  std::vector<std::string> names_;
};

struct SocialRecord {
  UserId user = 0;
  RelationId relation = 0;
  EntityId entity = 0;

  friend auto operator<=>(const SocialRecord&, const SocialRecord&) = default;
};

/// Users, their per-relation entity sets, and an entity -> members index per relation.
/// Entities are namespaced per relation and addressed internally by a dense per-relation
/// index (position in the sorted list of distinct entity ids).
class SocialGraph {
 public:
  SocialGraph() = default;
  SocialGraph(RelationSchema schema, std::span<const SocialRecord> records);

  const RelationSchema& schema() const noexcept { return schema_; }
  std::size_t relation_count() const noexcept { return schema_.size(); }
  std::size_t user_count() const noexcept { return users_.size(); }

  /// User ids in ascending order; a user's index is its position here.
  const std::vector<UserId>& users() const noexcept { return users_; }
  std::optional<std::size_t> find_user(UserId user) const;
  /// Throws InvalidInput for a user outside the universe.
  std::size_t user_index(UserId user) const;

  /// Sorted entity indices of user `u` in relation `l`.
  std::span<const std::size_t> entities(std::size_t u, RelationId l) const;
  std::size_t entity_count(std::size_t u, RelationId l) const { return entities(u, l).size(); }
  std::vector<RelationId> present_relations(std::size_t u) const;
  bool has_all_relations(std::size_t u) const;

  /// Distinct entities seen in relation `l`.
  std::size_t entity_universe(RelationId l) const { return entity_ids_.at(l).size(); }
  EntityId entity_id(RelationId l, std::size_t entity_index) const {
    return entity_ids_.at(l).at(entity_index);
  }
  std::optional<std::size_t> find_entity(RelationId l, EntityId id) const;
  /// Deduplicated (user, entity) pairs in relation `l`.
  std::size_t record_count(RelationId l) const;
  /// Sorted user indices holding entity `entity_index` in relation `l`.
  std::span<const std::size_t> members(RelationId l, std::size_t entity_index) const;

  /// All deduplicated records, sorted by (user, relation, entity id).
  std::vector<SocialRecord> records() const;

  friend bool operator==(const SocialGraph& a, const SocialGraph& b) {
    return a.schema_ == b.schema_ && a.records() == b.records();
  }

 private:
  RelationSchema schema_;
  std::vector<UserId> users_;
  std::vector<std::vector<EntityId>> entity_ids_;                  // [l] sorted distinct ids
  std::vector<std::vector<std::vector<std::size_t>>> user_entities_;  // [u][l]
  std::vector<std::vector<std::vector<std::size_t>>> members_;        // [l][entity]
};

SocialGraph parse_social_text(std::string_view text, const RelationSchema& schema);
SocialGraph parse_social_file(const std::filesystem::path& path, const RelationSchema& schema);
std::string serialize_social(const SocialGraph& graph);
void write_social_file(const std::filesystem::path& path, const SocialGraph& graph);

/// Users v != u sharing at least one entity with u in relation l, ascending by index.
std::vector<std::size_t> neighbors(const SocialGraph& graph, std::size_t u, RelationId l);

/// Per-relation block widths of the concatenated social embedding.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<std::size_t> dims);

  std::size_t blocks() const noexcept { return dims_.size(); }
  std::size_t dim(RelationId l) const { return dims_.at(l); }
  std::size_t offset(RelationId l) const { return offsets_.at(l); }
  std::size_t total() const noexcept { return total_; }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

/// Learnable entity embeddings: one (entities x d_l) matrix per relation.
class EntityEmbeddingTable {
 public:
  EntityEmbeddingTable() = default;
  explicit EntityEmbeddingTable(std::vector<Tensor2> per_relation);

  /// Normal(0, scale^2) entries sized to the graph's entity universes.
  static EntityEmbeddingTable random(const SocialGraph& graph, std::span<const std::size_t> dims,
                                     double scale, Rng& rng);

  std::size_t relation_count() const noexcept { return tables_.size(); }
  const BlockLayout& layout() const noexcept { return layout_; }
  const Tensor2& relation(RelationId l) const { return tables_.at(l); }
  Tensor2& relation(RelationId l) { return tables_.at(l); }

  friend bool operator==(const EntityEmbeddingTable& a, const EntityEmbeddingTable& b) {
    return a.tables_ == b.tables_;
  }

 private:
  std::vector<Tensor2> tables_;
  BlockLayout layout_;
};

/// Concatenation over relations of the mean entity embedding; absent relations are zero blocks.
std::vector<double> social_embedding(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                     std::size_t u);
/// Same, addressed by user id; throws InvalidInput for unknown users.
std::vector<double> social_embedding_of(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                        UserId user);
/// One row per user index.
Tensor2 social_embeddings(const SocialGraph& graph, const EntityEmbeddingTable& table);

/// Routes d(loss)/d(X_u) to the entity rows that formed X_u: each entity in block l
/// receives the block gradient divided by n_l^u. Touched rows are appended to `touched[l]`.
void accumulate_entity_gradient(const SocialGraph& graph, std::size_t u, std::span<const double> d_x,
                                const BlockLayout& layout, std::vector<Tensor2>& grads,
                                std::vector<std::vector<std::size_t>>& touched);

/// Zeroes floor(fraction * |present|) randomly chosen present relation blocks, keeping at
/// least one present relation intact. Selection: shuffle `present` with `rng`, mask a prefix.
std::vector<double> mask_relations(std::span<const double> x, const BlockLayout& layout,
                                   std::span<const RelationId> present, double fraction, Rng& rng);

}  // namespace socialrec
