#include "socialrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <vector>

#include "socialrec/error.hpp"

namespace socialrec {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw InvalidInput(std::string(op) + ": inputs differ in length");
}

struct Contingency {
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  std::map<std::size_t, double> rows;
  std::map<std::size_t, double> cols;
  double n = 0.0;
};

Contingency contingency(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  Contingency c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.cells[{a[i], b[i]}] += 1.0;
    c.rows[a[i]] += 1.0;
    c.cols[b[i]] += 1.0;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

double choose2(double x) { return x * (x - 1.0) / 2.0; }

double entropy(const std::map<std::size_t, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  require_same_length(scores.size(), labels.size(), "auc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return scores[x] < scores[y]; });

  double positives = 0.0;
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positives += 1.0;
        rank_sum += avg_rank;
      } else if (labels[order[k]] != 0) {
        throw InvalidInput("auc: labels must be 0 or 1");
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw InvalidInput("auc: undefined without both positive and negative labels");
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  require_same_length(a.size(), b.size(), "adjusted_rand_index");
  if (a.empty()) throw InvalidInput("adjusted_rand_index: empty partitions");
  const auto c = contingency(a, b);
  double index = 0.0;
  for (const auto& [_, n] : c.cells) index += choose2(n);
  double sum_rows = 0.0;
  double sum_cols = 0.0;
  for (const auto& [_, n] : c.rows) sum_rows += choose2(n);
  for (const auto& [_, n] : c.cols) sum_cols += choose2(n);
  const double total = choose2(c.n);
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  // Both partitions trivial in the same way (all singletons or a single cluster).
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double normalized_mutual_information(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  require_same_length(a.size(), b.size(), "normalized_mutual_information");
  if (a.empty()) throw InvalidInput("normalized_mutual_information: empty partitions");
  const auto c = contingency(a, b);
  const double ha = entropy(c.rows, c.n);
  const double hb = entropy(c.cols, c.n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [key, n] : c.cells) {
    mi += (n / c.n) * std::log(n * c.n / (c.rows.at(key.first) * c.cols.at(key.second)));
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double agreement_rate(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  require_same_length(a.size(), b.size(), "agreement_rate");
  if (a.empty()) return 0.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

double relative_improvement(double auc_value, double baseline_auc) {
  if (baseline_auc <= 0.0) throw InvalidInput("relative_improvement: baseline AUC must be positive");
  return (auc_value - baseline_auc) / baseline_auc;
}

std::string format_percent(double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

}  // namespace socialrec
