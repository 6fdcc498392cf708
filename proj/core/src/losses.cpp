#include "socialrec/losses.hpp"

#include <algorithm>
#include <cmath>

#include "socialrec/error.hpp"

namespace socialrec {

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

LossGrad bce_loss(double p, int y) {
  if (y != 0 && y != 1) throw InvalidInput("bce: label must be 0 or 1");
  const double pc = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  if (y == 1) return {-std::log(pc), -1.0 / pc};
  return {-std::log(1.0 - pc), 1.0 / (1.0 - pc)};
}

namespace {

void require_distribution(std::span<const double> d, const char* name) {
  double sum = 0.0;
  for (double v : d) {
    if (!(v >= 0.0)) throw InvalidInput(std::string("kl: negative or NaN entry in ") + name);
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InvalidInput(std::string("kl: ") + name + " does not sum to 1");
  }
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidInput("kl: length mismatch");
  require_distribution(p, "p");
  require_distribution(q, "q");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    kl += p[i] * std::log(p[i] / std::max(q[i], kProbEpsilon));
  }
  return std::max(kl, 0.0);
}

std::vector<double> softmax(std::span<const double> z, double temperature) {
  if (!(temperature > 0.0)) throw InvalidInput("softmax: temperature must be positive");
  if (z.empty()) return {};
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp((z[i] - top) / temperature);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace socialrec
