#include "socialrec/interactions.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include "socialrec/checkpoint.hpp"
#include "socialrec/error.hpp"
#include "tsv.hpp"

namespace socialrec {

InteractionLog parse_interactions_text(std::string_view text) {
  InteractionLog log;
  tsv::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = tsv::split(line);
    if (fields.size() != 4) {
      throw DataError(tsv::where("interaction file", line_no) + "expected 4 tab-separated fields");
    }
    Interaction rec;
    rec.user = tsv::parse_int<UserId>(fields[0], "interaction file", line_no, "user id");
    rec.item = tsv::parse_int<ItemId>(fields[1], "interaction file", line_no, "item id");
    rec.label = tsv::parse_int<int>(fields[2], "interaction file", line_no, "label");
    if (rec.label != 0 && rec.label != 1) {
      throw DataError(tsv::where("interaction file", line_no) + "label must be 0 or 1");
    }
    rec.timestamp = tsv::parse_int<std::int64_t>(fields[3], "interaction file", line_no, "timestamp");
    log.push_back(rec);
  });
  return log;
}

InteractionLog parse_interactions_file(const std::filesystem::path& path) {
  return parse_interactions_text(read_file(path));
}

std::string serialize_interactions(const InteractionLog& log) {
  std::string out;
  out.reserve(log.size() * 24);
  for (const auto& r : log) {
    out += std::to_string(r.user);
    out += '\t';
    out += std::to_string(r.item);
    out += '\t';
    out += r.label ? '1' : '0';
    out += '\t';
    out += std::to_string(r.timestamp);
    out += '\n';
  }
  return out;
}

void write_interactions_file(const std::filesystem::path& path, const InteractionLog& log) {
  write_file(path, serialize_interactions(log));
}

ItemCatalog::ItemCatalog(std::vector<ItemId> items, std::vector<std::size_t> categories) {
  if (items.size() != categories.size()) {
    throw InvalidInput("item catalog: items and categories differ in length");
  }
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return items[a] < items[b]; });
  for (auto i : order) {
    if (!items_.empty() && items_.back() == items[i]) {
      throw InvalidInput("item catalog: duplicate item " + std::to_string(items[i]));
    }
    items_.push_back(items[i]);
    categories_.push_back(categories[i]);
    category_count_ = std::max(category_count_, categories[i] + 1);
  }
}

std::optional<std::size_t> ItemCatalog::find(ItemId item) const {
  const auto it = std::lower_bound(items_.begin(), items_.end(), item);
  if (it == items_.end() || *it != item) return std::nullopt;
  return static_cast<std::size_t>(it - items_.begin());
}

std::string ItemCatalog::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    out += std::to_string(items_[i]);
    out += '\t';
    out += std::to_string(categories_[i]);
    out += '\n';
  }
  return out;
}

ItemCatalog ItemCatalog::parse(std::string_view text) {
  std::vector<ItemId> items;
  std::vector<std::size_t> categories;
  tsv::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = tsv::split(line);
    if (fields.size() != 2) {
      throw DataError(tsv::where("item file", line_no) + "expected 2 tab-separated fields");
    }
    items.push_back(tsv::parse_int<ItemId>(fields[0], "item file", line_no, "item id"));
    categories.push_back(tsv::parse_int<std::size_t>(fields[1], "item file", line_no, "category"));
  });
  try {
    return ItemCatalog(std::move(items), std::move(categories));
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
}

TemporalSplit temporal_split(const InteractionLog& log, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("temporal_split: train fraction must lie in (0, 1)");
  }
  TemporalSplit split;
  if (log.empty()) return split;

  const auto [lo, hi] = std::minmax_element(log.begin(), log.end(), [](const auto& a, const auto& b) {
    return a.timestamp < b.timestamp;
  });
  if (lo->timestamp == hi->timestamp) {
    std::cerr << "warning: all interaction timestamps are equal; splitting by record order\n";
    split.degenerate = true;
    split.cutoff = static_cast<double>(lo->timestamp);
    const auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(log.size()));
    split.train.assign(log.begin(), log.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(log.begin() + static_cast<std::ptrdiff_t>(n_train), log.end());
    return split;
  }

  const double min_ts = static_cast<double>(lo->timestamp);
  const double max_ts = static_cast<double>(hi->timestamp);
  split.cutoff = min_ts + train_fraction * (max_ts - min_ts);
  for (const auto& r : log) {
    (static_cast<double>(r.timestamp) <= split.cutoff ? split.train : split.test).push_back(r);
  }
  return split;
}

ColdSplit cold_split(const InteractionLog& train, const InteractionLog& test, std::size_t threshold) {
  std::map<UserId, std::size_t> train_counts;
  for (const auto& r : train) ++train_counts[r.user];
  for (const auto& r : test) train_counts.try_emplace(r.user, 0);

  ColdSplit split;
  split.full = test;
  for (const auto& [user, count] : train_counts) {
    if (count <= threshold) split.cold_users.push_back(user);
  }
  for (const auto& r : test) {
    if (std::binary_search(split.cold_users.begin(), split.cold_users.end(), r.user)) {
      split.cold.push_back(r);
    }
  }
  return split;
}

}  // namespace socialrec
