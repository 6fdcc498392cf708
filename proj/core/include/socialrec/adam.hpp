#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace socialrec {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One parameter block seen by the optimizer. With `row_width` > 0 only the listed
/// `rows` are updated (lazy update for embedding tables); otherwise the whole block is.
struct ParamBlock {
  std::span<double> values;
  std::span<const double> grads;
  std::size_t row_width = 0;
  std::span<const std::size_t> rows = {};
};

class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const noexcept { return config_; }
  std::int64_t step() const noexcept { return step_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

  friend void adam_step(AdamState& state, std::span<const ParamBlock> blocks);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Bias-corrected Adam update. Moment shapes are fixed by the first call; a later
/// call with different block sizes throws InvalidInput.
void adam_step(AdamState& state, std::span<const ParamBlock> blocks);

}  // namespace socialrec
