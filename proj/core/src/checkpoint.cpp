#include "socialrec/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "socialrec/error.hpp"
#include "socialrec/rng.hpp"

namespace socialrec {

std::string format_double(double value) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc()) throw InvalidInput("format_double: conversion failed");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::uint64_t file_hash(const std::filesystem::path& path) { return fnv1a(read_file(path)); }

std::string hex64(std::uint64_t value) {
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, 16);
  std::string digits(buf, end);
  return std::string(16 - digits.size(), '0') + digits;
}

void Checkpoint::set_meta(const std::string& key, std::string value) {
  if (key.empty() || key.find_first_of(" \t\n") != std::string::npos) {
    throw InvalidInput("checkpoint: meta key must be a non-empty token");
  }
  if (value.find('\n') != std::string::npos) {
    throw InvalidInput("checkpoint: meta value must be a single line");
  }
  meta_[key] = std::move(value);
}

std::optional<std::string> Checkpoint::meta(std::string_view key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) return std::nullopt;
  return it->second;
}

const std::string& Checkpoint::require_meta(std::string_view key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) throw DataError("checkpoint: missing meta '" + std::string(key) + "'");
  return it->second;
}

void Checkpoint::put(const std::string& name, Tensor2 tensor) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
    throw InvalidInput("checkpoint: tensor name must be a non-empty token");
  }
  tensors_[name] = std::move(tensor);
}

bool Checkpoint::has(std::string_view name) const { return tensors_.find(name) != tensors_.end(); }

const Tensor2& Checkpoint::tensor(std::string_view name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw DataError("checkpoint: missing tensor '" + std::string(name) + "'");
  return it->second;
}

std::string Checkpoint::serialize() const {
  std::string out = "format_version " + std::to_string(kFormatVersion) + "\n";
  for (const auto& [key, value] : meta_) out += "meta " + key + " " + value + "\n";
  for (const auto& [name, t] : tensors_) {
    out += "tensor " + name + " " + std::to_string(t.rows()) + " " + std::to_string(t.cols()) + "\n";
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const auto row = t.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ' ';
        out += format_double(row[c]);
      }
      out += '\n';
    }
  }
  return out;
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const auto end = text_.find('\n', pos_);
    const auto stop = end == std::string_view::npos ? text_.size() : end;
    line = text_.substr(pos_, stop - pos_);
    pos_ = stop + 1;
    ++line_no_;
    return true;
  }
  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::size_t parse_count(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("checkpoint: bad count '" + std::string(s) + "'");
  }
  return v;
}

std::string_view next_token(std::string_view& s) {
  const auto start = s.find_first_not_of(' ');
  if (start == std::string_view::npos) {
    s = {};
    return {};
  }
  s.remove_prefix(start);
  const auto end = s.find(' ');
  auto tok = s.substr(0, end);
  s.remove_prefix(end == std::string_view::npos ? s.size() : end);
  return tok;
}

}  // namespace

Checkpoint Checkpoint::parse(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line)) throw DataError("checkpoint: empty file");
  {
    auto rest = line;
    if (next_token(rest) != "format_version") throw DataError("checkpoint: missing format_version");
    const auto version = parse_count(next_token(rest));
    if (version != static_cast<std::size_t>(kFormatVersion)) {
      throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    }
  }
  Checkpoint ckpt;
  while (reader.next(line)) {
    if (line.empty()) continue;
    auto rest = line;
    const auto kind = next_token(rest);
    if (kind == "meta") {
      const auto key = next_token(rest);
      if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
      ckpt.meta_[std::string(key)] = std::string(rest);
    } else if (kind == "tensor") {
      const std::string name(next_token(rest));
      const auto rows = parse_count(next_token(rest));
      const auto cols = parse_count(next_token(rest));
      Tensor2 t(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        std::string_view row_line;
        if (!reader.next(row_line)) throw DataError("checkpoint: truncated tensor " + name);
        for (std::size_t c = 0; c < cols; ++c) {
          const auto tok = next_token(row_line);
          if (tok.empty()) throw DataError("checkpoint: short row in tensor " + name);
          t(r, c) = parse_double(tok);
        }
      }
      ckpt.tensors_[name] = std::move(t);
    } else {
      throw DataError("checkpoint: unexpected line " + std::to_string(reader.line_no()));
    }
  }
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return parse(read_file(path)); }

void store_net(Checkpoint& ckpt, const std::string& prefix, const DenseNet& net) {
  const auto& layers = net.layers();
  ckpt.set_meta(prefix + ".layers", std::to_string(layers.size()));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string base = prefix + ".layer" + std::to_string(i);
    ckpt.put(base + ".weight", layers[i].weight);
    ckpt.put(base + ".bias", Tensor2::row_vector(layers[i].bias));
    ckpt.set_meta(base + ".activation", std::string(to_string(layers[i].activation)));
  }
}

DenseNet load_net(const Checkpoint& ckpt, const std::string& prefix) {
  const auto count = parse_count(ckpt.require_meta(prefix + ".layers"));
  std::vector<DenseLayer> layers(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string base = prefix + ".layer" + std::to_string(i);
    layers[i].weight = ckpt.tensor(base + ".weight");
    const auto& bias = ckpt.tensor(base + ".bias");
    layers[i].bias.assign(bias.values().begin(), bias.values().end());
    layers[i].activation = parse_activation(ckpt.require_meta(base + ".activation"));
  }
  return DenseNet(std::move(layers));
}

}  // namespace socialrec
