#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace socialrec {

/// Dense row-major matrix of doubles. A vector is a 1 x n tensor.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor2 row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  void fill(double value);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
bool all_finite(std::span<const double> values) noexcept;

}  // namespace socialrec
