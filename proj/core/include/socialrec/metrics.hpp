#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace socialrec {

/// Mann-Whitney AUC with average ranks for ties. Throws InvalidInput unless both classes
/// are present or when lengths differ.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Adjusted Rand index of two labelings of the same elements.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Normalized mutual information, arithmetic-mean normalization. Two single-cluster
/// labelings score 1.
double normalized_mutual_information(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Share of positions where the labels agree.
double agreement_rate(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// (auc - baseline) / baseline.
double relative_improvement(double auc_value, double baseline_auc);

/// Percentage with two decimals, e.g. "0.65%".
std::string format_percent(double fraction);

}  // namespace socialrec
