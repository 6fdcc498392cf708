#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "socialrec/interactions.hpp"
#include "socialrec/social_graph.hpp"

namespace socialrec {

/// Knobs of a synthetic world with planted interest groups.
struct WorldConfig {
  std::size_t groups = 8;
  std::size_t users_per_group = 250;
  std::vector<std::string> relations = {"star", "movie", "friend", "uploader"};
  std::size_t entities_per_group = 1;     // per relation, per group
  std::size_t max_entities_per_user = 3;  // per present relation, drawn uniformly in 1..max
  double leak = 0.05;                     // chance an entity comes from another group's pool
  double presence = 0.6;                  // chance a user holds a given relation type
  std::size_t items_per_group = 1250;
  double own_group_impressions = 0.25;    // share of impressions drawn from the user's own pool
  double p_match = 0.7;
  double p_other = 0.1;
  double label_noise = 0.0;
  double cold_fraction = 0.3;
  std::size_t cold_threshold = 3;
  std::size_t warm_min = 25;
  std::size_t warm_max = 45;
  std::size_t cold_test_min = 4;
  std::size_t cold_test_max = 8;
  double horizon_days = 15.0;
  double train_fraction = 14.0 / 15.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError on an infeasible configuration.
  void validate() const;
  std::size_t user_count() const noexcept { return groups * users_per_group; }
  std::size_t item_count() const noexcept { return groups * items_per_group; }
};

struct GroundTruth {
  std::vector<std::pair<UserId, std::size_t>> user_groups;  // sorted by user
  std::vector<std::pair<ItemId, std::size_t>> item_groups;  // sorted by item

  std::string serialize_users() const;
  std::string serialize_items() const;
  /// Reads `id<TAB>group` lines; `what` names the file in error messages.
  static std::vector<std::pair<std::uint64_t, std::size_t>> parse_pairs(std::string_view text,
                                                                         std::string_view what);
};

struct World {
  WorldConfig config;
  SocialGraph graph;
  InteractionLog log;
  ItemCatalog catalog;
  GroundTruth truth;
};

/// Every user draws from its own random stream (seed, user id), so the result does not
/// depend on generation order.
World generate_world(const WorldConfig& config);

struct WorldFiles {
  std::filesystem::path social;
  std::filesystem::path interactions;
  std::filesystem::path items;
  std::filesystem::path truth_users;
  std::filesystem::path truth_items;

  static WorldFiles in(const std::filesystem::path& dir);
};

void write_world(const World& world, const WorldFiles& files);

}  // namespace socialrec
