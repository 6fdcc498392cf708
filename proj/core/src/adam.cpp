#include "socialrec/adam.hpp"

#include <cmath>

#include "socialrec/error.hpp"

namespace socialrec {

namespace {

inline void update_one(double& value, double grad, double& m, double& v, const AdamConfig& cfg,
                       double correction1, double correction2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
  const double m_hat = m / correction1;
  const double v_hat = v / correction2;
  value -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
}

}  // namespace

void adam_step(AdamState& state, std::span<const ParamBlock> blocks) {
  if (state.m_.empty()) {
    for (const auto& block : blocks) {
      state.m_.emplace_back(block.values.size(), 0.0);
      state.v_.emplace_back(block.values.size(), 0.0);
    }
  }
  if (state.m_.size() != blocks.size()) {
    throw InvalidInput("adam: parameter block count changed between steps");
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].values.size() != state.m_[b].size() ||
        blocks[b].grads.size() != blocks[b].values.size()) {
      throw InvalidInput("adam: parameter/gradient shape mismatch in block " + std::to_string(b));
    }
  }

  ++state.step_;
  const auto& cfg = state.config_;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    auto& m = state.m_[b];
    auto& v = state.v_[b];
    if (block.row_width == 0) {
      for (std::size_t i = 0; i < block.values.size(); ++i) {
        update_one(block.values[i], block.grads[i], m[i], v[i], cfg, correction1, correction2);
      }
      continue;
    }
    for (std::size_t row : block.rows) {
      const std::size_t begin = row * block.row_width;
      if (begin + block.row_width > block.values.size()) {
        throw InvalidInput("adam: touched row out of range");
      }
      for (std::size_t i = begin; i < begin + block.row_width; ++i) {
        update_one(block.values[i], block.grads[i], m[i], v[i], cfg, correction1, correction2);
      }
    }
  }
}

}  // namespace socialrec
