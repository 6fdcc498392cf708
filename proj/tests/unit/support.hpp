#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "socialrec/rng.hpp"
#include "socialrec/social_graph.hpp"
#include "socialrec/synthetic.hpp"
#include "socialrec/tensor.hpp"

namespace socialrec::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;

/// |a - n| / max(|a|, |n|), with the denominator floored so that gradients of order
/// rounding noise compare absolutely.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central difference of `loss` in `param`; the parameter is restored afterwards.
inline double central_difference(double& param, const std::function<double()>& loss, double step = kFdStep) {
  const double saved = param;
  param = saved + step;
  const double up = loss();
  param = saved - step;
  const double down = loss();
  param = saved;
  return (up - down) / (2.0 * step);
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Tensor2 random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  return Tensor2(rows, cols, random_vector(rng, rows * cols, lo, hi));
}

/// Random point on the probability simplex with strictly positive entries.
inline std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  auto v = random_vector(rng, n, 0.05, 1.0);
  double sum = 0.0;
  for (double x : v) sum += x;
  for (auto& x : v) x /= sum;
  return v;
}

/// Graph over `users` users with random memberships: each user holds each relation with
/// probability `presence`, drawing 1..3 entities from `entities` per relation.
inline SocialGraph random_graph(Rng& rng, std::size_t users, std::size_t relations, std::size_t entities,
                                double presence = 0.7) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < relations; ++l) names.push_back("r" + std::to_string(l));
  std::vector<SocialRecord> records;
  for (UserId u = 0; u < users; ++u) {
    bool any = false;
    for (RelationId l = 0; l < relations; ++l) {
      if (!bernoulli(rng, presence)) continue;
      any = true;
      const auto count = uniform_int(rng, 1, 3);
      for (std::uint64_t i = 0; i < count; ++i) records.push_back({u, l, uniform_int(rng, 0, entities - 1)});
    }
    if (!any) records.push_back({u, 0, uniform_int(rng, 0, entities - 1)});
  }
  return SocialGraph(RelationSchema(std::move(names)), records);
}

/// A world small enough for unit tests: 4 groups of 40 users.
inline WorldConfig small_world(std::uint64_t seed = 1) {
  WorldConfig w;
  w.groups = 4;
  w.users_per_group = 40;
  w.items_per_group = 60;
  w.presence = 0.8;
  w.seed = seed;
  return w;
}

}  // namespace socialrec::testing
