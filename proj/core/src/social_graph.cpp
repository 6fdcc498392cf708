#include "socialrec/social_graph.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <set>

#include "socialrec/checkpoint.hpp"
#include "socialrec/error.hpp"

namespace socialrec {

RelationSchema::RelationSchema(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw InvalidInput("relation schema: at least one relation type required");
  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty() || n.find_first_of("\t\n ") != std::string::npos) {
      throw InvalidInput("relation schema: invalid relation name '" + n + "'");
    }
    if (!seen.insert(n).second) throw InvalidInput("relation schema: duplicate name '" + n + "'");
  }
}

RelationSchema RelationSchema::defaults() {
  return RelationSchema({"star", "movie", "friend", "uploader"});
}

std::optional<RelationId> RelationSchema::find(std::string_view name) const {
  for (RelationId i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

SocialGraph::SocialGraph(RelationSchema schema, std::span<const SocialRecord> records)
    : schema_(std::move(schema)) {
  const std::size_t num_relations = schema_.size();
  std::vector<SocialRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  entity_ids_.assign(num_relations, {});
  for (const auto& r : sorted) {
    if (r.relation >= num_relations) {
      throw InvalidInput("social graph: relation id " + std::to_string(r.relation) + " out of range");
    }
    users_.push_back(r.user);
    entity_ids_[r.relation].push_back(r.entity);
  }
  users_.erase(std::unique(users_.begin(), users_.end()), users_.end());
  for (auto& ids : entity_ids_) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }

  user_entities_.assign(users_.size(), std::vector<std::vector<std::size_t>>(num_relations));
  members_.resize(num_relations);
  for (RelationId l = 0; l < num_relations; ++l) members_[l].assign(entity_ids_[l].size(), {});

  std::size_t u = 0;
  for (const auto& r : sorted) {
    while (users_[u] != r.user) ++u;
    const auto e = *find_entity(r.relation, r.entity);
    user_entities_[u][r.relation].push_back(e);
    members_[r.relation][e].push_back(u);
  }
  for (auto& per_user : user_entities_) {
    for (auto& list : per_user) std::sort(list.begin(), list.end());
  }
}

std::optional<std::size_t> SocialGraph::find_user(UserId user) const {
  auto it = std::lower_bound(users_.begin(), users_.end(), user);
  if (it == users_.end() || *it != user) return std::nullopt;
  return static_cast<std::size_t>(it - users_.begin());
}

std::size_t SocialGraph::user_index(UserId user) const {
  auto idx = find_user(user);
  if (!idx) throw InvalidInput("unknown user " + std::to_string(user));
  return *idx;
}

std::span<const std::size_t> SocialGraph::entities(std::size_t u, RelationId l) const {
  return user_entities_.at(u).at(l);
}

std::vector<RelationId> SocialGraph::present_relations(std::size_t u) const {
  std::vector<RelationId> present;
  for (RelationId l = 0; l < relation_count(); ++l) {
    if (!user_entities_.at(u)[l].empty()) present.push_back(l);
  }
  return present;
}

bool SocialGraph::has_all_relations(std::size_t u) const {
  const auto& per = user_entities_.at(u);
  return std::all_of(per.begin(), per.end(), [](const auto& v) { return !v.empty(); });
}

std::optional<std::size_t> SocialGraph::find_entity(RelationId l, EntityId id) const {
  const auto& ids = entity_ids_.at(l);
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

std::size_t SocialGraph::record_count(RelationId l) const {
  std::size_t n = 0;
  for (const auto& m : members_.at(l)) n += m.size();
  return n;
}

std::span<const std::size_t> SocialGraph::members(RelationId l, std::size_t entity_index) const {
  return members_.at(l).at(entity_index);
}

std::vector<SocialRecord> SocialGraph::records() const {
  std::vector<SocialRecord> out;
  for (std::size_t u = 0; u < users_.size(); ++u) {
    for (RelationId l = 0; l < relation_count(); ++l) {
      for (auto e : user_entities_[u][l]) out.push_back({users_[u], l, entity_ids_[l][e]});
    }
  }
  return out;
}

namespace {

std::uint64_t parse_id(std::string_view field, std::size_t line_no, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError("social file line " + std::to_string(line_no) + ": bad " + what + " '" +
                    std::string(field) + "'");
  }
  return v;
}

}  // namespace

SocialGraph parse_social_text(std::string_view text, const RelationSchema& schema) {
  std::vector<SocialRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw DataError("social file line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    }
    const auto relation_name = line.substr(t1 + 1, t2 - t1 - 1);
    const auto relation = schema.find(relation_name);
    if (!relation) {
      throw DataError("social file line " + std::to_string(line_no) + ": unknown relation '" +
                      std::string(relation_name) + "'");
    }
    records.push_back({parse_id(line.substr(0, t1), line_no, "user id"), *relation,
                       parse_id(line.substr(t2 + 1), line_no, "entity id")});
  }
  return SocialGraph(schema, records);
}

SocialGraph parse_social_file(const std::filesystem::path& path, const RelationSchema& schema) {
  return parse_social_text(read_file(path), schema);
}

std::string serialize_social(const SocialGraph& graph) {
  std::string out;
  for (const auto& r : graph.records()) {
    out += std::to_string(r.user);
    out += '\t';
    out += graph.schema().name(r.relation);
    out += '\t';
    out += std::to_string(r.entity);
    out += '\n';
  }
  return out;
}

void write_social_file(const std::filesystem::path& path, const SocialGraph& graph) {
  write_file(path, serialize_social(graph));
}

std::vector<std::size_t> neighbors(const SocialGraph& graph, std::size_t u, RelationId l) {
  std::vector<std::size_t> out;
  for (auto e : graph.entities(u, l)) {
    const auto m = graph.members(l, e);
    out.insert(out.end(), m.begin(), m.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  out.erase(std::remove(out.begin(), out.end(), u), out.end());
  return out;
}

BlockLayout::BlockLayout(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  offsets_.reserve(dims_.size());
  for (auto d : dims_) {
    offsets_.push_back(total_);
    total_ += d;
  }
}

EntityEmbeddingTable::EntityEmbeddingTable(std::vector<Tensor2> per_relation)
    : tables_(std::move(per_relation)) {
  std::vector<std::size_t> dims;
  for (const auto& t : tables_) dims.push_back(t.cols());
  layout_ = BlockLayout(std::move(dims));
}

EntityEmbeddingTable EntityEmbeddingTable::random(const SocialGraph& graph,
                                                  std::span<const std::size_t> dims, double scale,
                                                  Rng& rng) {
  if (dims.size() != graph.relation_count()) {
    throw InvalidInput("entity table: one dimension per relation required");
  }
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<Tensor2> tables;
  for (RelationId l = 0; l < dims.size(); ++l) {
    Tensor2 t(graph.entity_universe(l), dims[l]);
    for (double& v : t.values()) v = normal(rng);
    tables.push_back(std::move(t));
  }
  return EntityEmbeddingTable(std::move(tables));
}

std::vector<double> social_embedding(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                     std::size_t u) {
  if (u >= graph.user_count()) throw InvalidInput("social embedding: user index out of range");
  if (table.relation_count() != graph.relation_count()) {
    throw InvalidInput("social embedding: table/graph relation count mismatch");
  }
  const auto& layout = table.layout();
  std::vector<double> x(layout.total(), 0.0);
  for (RelationId l = 0; l < graph.relation_count(); ++l) {
    const auto ents = graph.entities(u, l);
    if (ents.empty()) continue;
    std::span<double> block(x.data() + layout.offset(l), layout.dim(l));
    const double inv = 1.0 / static_cast<double>(ents.size());
    for (auto e : ents) axpy(inv, table.relation(l).row(e), block);
  }
  return x;
}

std::vector<double> social_embedding_of(const SocialGraph& graph, const EntityEmbeddingTable& table,
                                        UserId user) {
  return social_embedding(graph, table, graph.user_index(user));
}

Tensor2 social_embeddings(const SocialGraph& graph, const EntityEmbeddingTable& table) {
  Tensor2 out(graph.user_count(), table.layout().total());
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    const auto x = social_embedding(graph, table, u);
    std::copy(x.begin(), x.end(), out.row(u).begin());
  }
  return out;
}

void accumulate_entity_gradient(const SocialGraph& graph, std::size_t u, std::span<const double> d_x,
                                const BlockLayout& layout, std::vector<Tensor2>& grads,
                                std::vector<std::vector<std::size_t>>& touched) {
  for (RelationId l = 0; l < graph.relation_count(); ++l) {
    const auto ents = graph.entities(u, l);
    if (ents.empty()) continue;
    const auto block = d_x.subspan(layout.offset(l), layout.dim(l));
    const double inv = 1.0 / static_cast<double>(ents.size());
    for (auto e : ents) {
      axpy(inv, block, grads[l].row(e));
      touched[l].push_back(e);
    }
  }
}

std::vector<double> mask_relations(std::span<const double> x, const BlockLayout& layout,
                                   std::span<const RelationId> present, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw InvalidInput("mask_relations: fraction must lie in [0, 1)");
  }
  if (x.size() != layout.total()) throw InvalidInput("mask_relations: embedding length mismatch");
  std::vector<double> out(x.begin(), x.end());
  if (present.size() <= 1) return out;
  auto count = static_cast<std::size_t>(fraction * static_cast<double>(present.size()));
  count = std::min(count, present.size() - 1);
  if (count == 0) return out;
  std::vector<RelationId> order(present.begin(), present.end());
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < count; ++i) {
    const auto l = order[i];
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(layout.offset(l)), layout.dim(l), 0.0);
  }
  return out;
}

}  // namespace socialrec
