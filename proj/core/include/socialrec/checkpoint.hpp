#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "socialrec/dense_net.hpp"
#include "socialrec/tensor.hpp"

namespace socialrec {

/// Plain-text checkpoint: a format-version line, `meta key value` lines, then one
/// `tensor name rows cols` header per tensor followed by its rows in %.17g.
/// Parsing a serialized checkpoint reproduces every double bit-for-bit.
class Checkpoint {
 public:
  static constexpr int kFormatVersion = 1;

  void set_meta(const std::string& key, std::string value);
  std::optional<std::string> meta(std::string_view key) const;
  const std::string& require_meta(std::string_view key) const;
  const std::map<std::string, std::string, std::less<>>& all_meta() const noexcept { return meta_; }

  void put(const std::string& name, Tensor2 tensor);
  bool has(std::string_view name) const;
  const Tensor2& tensor(std::string_view name) const;
  const std::map<std::string, Tensor2, std::less<>>& tensors() const noexcept { return tensors_; }

  std::string serialize() const;
  static Checkpoint parse(std::string_view text);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

 private:
  std::map<std::string, std::string, std::less<>> meta_;
  std::map<std::string, Tensor2, std::less<>> tensors_;
};

void store_net(Checkpoint& ckpt, const std::string& prefix, const DenseNet& net);
DenseNet load_net(const Checkpoint& ckpt, const std::string& prefix);

std::string format_double(double value);
double parse_double(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
std::uint64_t file_hash(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

}  // namespace socialrec
