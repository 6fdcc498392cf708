#pragma once

// Line/field helpers shared by the TSV readers.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "socialrec/error.hpp"

namespace socialrec::tsv {

/// Calls fn(line_no, line) for every non-blank, non-comment line (1-based numbering).
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
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
    fn(line_no, line);
  }
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

inline std::string where(std::string_view file, std::size_t line_no) {
  return std::string(file) + " line " + std::to_string(line_no) + ": ";
}

template <typename Int>
Int parse_int(std::string_view field, std::string_view file, std::size_t line_no,
              std::string_view what) {
  Int value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw DataError(where(file, line_no) + "invalid " + std::string(what) + " '" +
                    std::string(field) + "'");
  }
  return value;
}

}  // namespace socialrec::tsv
