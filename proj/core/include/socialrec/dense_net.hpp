#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "socialrec/rng.hpp"
#include "socialrec/tensor.hpp"

namespace socialrec {

enum class Activation { kIdentity, kLeakyRelu, kSigmoid };

/// Negative-side slope of the leaky ReLU used throughout.
inline constexpr double kLeakySlope = 0.01;

std::string_view to_string(Activation activation) noexcept;
Activation parse_activation(std::string_view name);

double activate(Activation activation, double pre) noexcept;
/// Derivative of the activation expressed through its output value.
double activation_derivative(Activation activation, double output) noexcept;

struct DenseLayer {
  Tensor2 weight;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::kIdentity;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Fully connected feed-forward network.
class DenseNet {
 public:
  DenseNet() = default;
  /// Throws InvalidInput when adjacent layer dimensions do not chain.
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Layer widths `dims` = {in, h1, ..., out}; hidden layers use `hidden`, the last uses `output`.
  /// Weights are Glorot-uniform, biases zero.
  static DenseNet make(std::span<const std::size_t> dims, Activation hidden, Activation output,
                       Rng& rng);

  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  std::size_t parameter_count() const noexcept;
  bool empty() const noexcept { return layers_.empty(); }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Per-layer activations recorded by forward() and consumed by backward().
/// Buffers are reused across calls.
struct ForwardCache {
  const DenseNet* net = nullptr;
  std::vector<std::vector<double>> inputs;   // input seen by layer i
  std::vector<std::vector<double>> outputs;  // post-activation output of layer i

  std::span<const double> output() const noexcept { return outputs.back(); }
};

/// Gradient accumulator shaped like a DenseNet.
struct DenseNetGrad {
  std::vector<Tensor2> weight;
  std::vector<std::vector<double>> bias;

  DenseNetGrad() = default;
  explicit DenseNetGrad(const DenseNet& net);
  void zero();
};

void forward(const DenseNet& net, std::span<const double> x, ForwardCache& cache);
std::vector<double> forward(const DenseNet& net, std::span<const double> x);

/// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
std::vector<double> backward(const DenseNet& net, const ForwardCache& cache,
                             std::span<const double> d_out, DenseNetGrad& grad);

}  // namespace socialrec
