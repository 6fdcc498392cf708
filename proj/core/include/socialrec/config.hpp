#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "socialrec/ccm.hpp"
#include "socialrec/recommender.hpp"
#include "socialrec/synthetic.hpp"

namespace socialrec {

/// Everything a run depends on. The world seed is not a key of its own: each run
/// generates its world from the run seed.
struct ExperimentConfig {
  WorldConfig world;
  CcmConfig ccm;
  RecommenderConfig rec;

  std::uint64_t seed = 1;
  std::size_t repeats = 5;
  Variant variant = Variant::kSocial;
  std::vector<Variant> variants = {all_variants().begin(), all_variants().end()};
  std::size_t cold_threshold = 3;
  double train_fraction = 14.0 / 15.0;

  std::string data_dir;  // existing world files; empty means generate from `world`
  std::string out_dir = "out";

  /// Sets one key from its textual value; throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  /// Every key, sorted.
  static const std::vector<std::string>& keys();

  /// `key = value` lines, sorted by key. Parsing the echo reproduces the config.
  std::string echo() const;
  void validate() const;
};

/// Applies `key = value` lines (blank lines and # comments skipped) on top of `config`.
void apply_config_text(ExperimentConfig& config, std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace socialrec
