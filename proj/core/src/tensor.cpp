#include "socialrec/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "socialrec/error.hpp"

namespace socialrec {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw InvalidInput("tensor: value count does not match shape");
  }
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Tensor2::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor2::all_finite() const noexcept { return socialrec::all_finite(values_); }

// Four independent accumulators keep the loop pipelined without reassociating
// across runs: the summation order is fixed, so results are reproducible.
double dot(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace socialrec
