#pragma once

#include <span>
#include <vector>

namespace socialrec {

/// Clamp for probabilities entering a logarithm.
inline constexpr double kProbEpsilon = 1e-7;

struct LossGrad {
  double loss = 0.0;
  double d_input = 0.0;
};

/// Binary cross-entropy of probability `p` against label `y` in {0, 1}.
LossGrad bce_loss(double p, int y);

/// KL(p || q) with 0 * log(0 / q) = 0. Both inputs must be distributions of equal length.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Temperature softmax; subtracts the max before exponentiating.
std::vector<double> softmax(std::span<const double> z, double temperature = 1.0);

double sigmoid(double x) noexcept;

}  // namespace socialrec
