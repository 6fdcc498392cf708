#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "socialrec/social_graph.hpp"

namespace socialrec {

using ItemId = std::uint64_t;

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  int label = 0;
  std::int64_t timestamp = 0;

  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

using InteractionLog = std::vector<Interaction>;

InteractionLog parse_interactions_text(std::string_view text);
InteractionLog parse_interactions_file(const std::filesystem::path& path);
std::string serialize_interactions(const InteractionLog& log);
void write_interactions_file(const std::filesystem::path& path, const InteractionLog& log);

/// item -> category, sorted by item id.
class ItemCatalog {
 public:
  ItemCatalog() = default;
  ItemCatalog(std::vector<ItemId> items, std::vector<std::size_t> categories);

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t category_count() const noexcept { return category_count_; }
  const std::vector<ItemId>& items() const noexcept { return items_; }
  const std::vector<std::size_t>& categories() const noexcept { return categories_; }
  std::optional<std::size_t> find(ItemId item) const;

  std::string serialize() const;
  static ItemCatalog parse(std::string_view text);

 private:
  std::vector<ItemId> items_;
  std::vector<std::size_t> categories_;
  std::size_t category_count_ = 0;
};

struct TemporalSplit {
  InteractionLog train;
  InteractionLog test;
  double cutoff = 0.0;      // records with timestamp <= cutoff train
  bool degenerate = false;  // all timestamps equal: split by record order instead
};

/// Time-range split: cutoff = min_ts + train_fraction * (max_ts - min_ts). Relative record
/// order is preserved in both halves.
TemporalSplit temporal_split(const InteractionLog& log, double train_fraction);

inline constexpr std::size_t kNoColdThreshold = std::numeric_limits<std::size_t>::max();

struct ColdSplit {
  InteractionLog full;             // the test set, unchanged
  InteractionLog cold;             // test records of cold users
  std::vector<UserId> cold_users;  // users with <= threshold training events, sorted
};

/// Cold users are those whose training-period event count is <= threshold (users with no
/// training events included).
ColdSplit cold_split(const InteractionLog& train, const InteractionLog& test, std::size_t threshold);

}  // namespace socialrec
