#include "socialrec/dense_net.hpp"

#include <cmath>
#include <string>

#include "socialrec/error.hpp"

namespace socialrec {

std::string_view to_string(Activation activation) noexcept {
  switch (activation) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kLeakyRelu:
      return "leaky-relu";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "leaky-relu") return Activation::kLeakyRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw InvalidInput("unknown activation '" + std::string(name) + "'");
}

double activate(Activation activation, double pre) noexcept {
  switch (activation) {
    case Activation::kIdentity:
      return pre;
    case Activation::kLeakyRelu:
      return pre > 0.0 ? pre : kLeakySlope * pre;
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-pre));
  }
  return pre;
}

double activation_derivative(Activation activation, double output) noexcept {
  switch (activation) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kLeakyRelu:
      return output > 0.0 ? 1.0 : kLeakySlope;
    case Activation::kSigmoid:
      return output * (1.0 - output);
  }
  return 1.0;
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    if (layer.bias.size() != layer.weight.rows()) {
      throw InvalidInput("dense net: bias length differs from layer width at layer " +
                         std::to_string(i));
    }
    if (i > 0 && layers_[i - 1].weight.rows() != layer.weight.cols()) {
      throw InvalidInput("dense net: layer " + std::to_string(i) +
                         " input width does not match previous output");
    }
  }
}

DenseNet DenseNet::make(std::span<const std::size_t> dims, Activation hidden, Activation output,
                        Rng& rng) {
  if (dims.size() < 2) throw InvalidInput("dense net: need at least input and output widths");
  std::vector<DenseLayer> layers;
  layers.reserve(dims.size() - 1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t in = dims[i];
    const std::size_t out = dims[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> init(-limit, limit);
    DenseLayer layer;
    layer.weight = Tensor2(out, in);
    for (double& w : layer.weight.values()) w = init(rng);
    layer.bias.assign(out, 0.0);
    layer.activation = (i + 2 == dims.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

std::size_t DenseNet::input_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.front().weight.cols();
}

std::size_t DenseNet::output_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

std::size_t DenseNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

DenseNetGrad::DenseNetGrad(const DenseNet& net) {
  for (const auto& layer : net.layers()) {
    weight.emplace_back(layer.weight.rows(), layer.weight.cols());
    bias.emplace_back(layer.bias.size(), 0.0);
  }
}

void DenseNetGrad::zero() {
  for (auto& w : weight) w.fill(0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

void forward(const DenseNet& net, std::span<const double> x, ForwardCache& cache) {
  if (net.empty()) throw InvalidInput("forward: empty network");
  if (x.size() != net.input_dim()) {
    throw InvalidInput("forward: input length " + std::to_string(x.size()) + " != " +
                       std::to_string(net.input_dim()));
  }
  const auto& layers = net.layers();
  cache.net = &net;
  cache.inputs.resize(layers.size());
  cache.outputs.resize(layers.size());
  cache.inputs[0].assign(x.begin(), x.end());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (i > 0) cache.inputs[i] = cache.outputs[i - 1];
    auto& out = cache.outputs[i];
    out.resize(layer.weight.rows());
    const auto& in = cache.inputs[i];
    for (std::size_t r = 0; r < out.size(); ++r) {
      out[r] = activate(layer.activation, layer.bias[r] + dot(layer.weight.row(r), in));
    }
  }
}

std::vector<double> forward(const DenseNet& net, std::span<const double> x) {
  ForwardCache cache;
  forward(net, x, cache);
  return cache.outputs.back();
}

std::vector<double> backward(const DenseNet& net, const ForwardCache& cache,
                             std::span<const double> d_out, DenseNetGrad& grad) {
  const auto& layers = net.layers();
  if (cache.net != &net || cache.outputs.size() != layers.size()) {
    throw InvalidInput("backward: cache was not produced by this network");
  }
  if (grad.weight.size() != layers.size()) {
    throw InvalidInput("backward: gradient accumulator does not match network");
  }
  if (d_out.size() != net.output_dim()) {
    throw InvalidInput("backward: upstream gradient length mismatch");
  }
  std::vector<double> delta(d_out.begin(), d_out.end());
  std::vector<double> d_in;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const auto& out = cache.outputs[li];
    const auto& in = cache.inputs[li];
    if (out.size() != layer.weight.rows() || in.size() != layer.weight.cols()) {
      throw InvalidInput("backward: stale cache");
    }
    for (std::size_t r = 0; r < delta.size(); ++r) {
      delta[r] *= activation_derivative(layer.activation, out[r]);
    }
    auto& gw = grad.weight[li];
    auto& gb = grad.bias[li];
    d_in.assign(layer.weight.cols(), 0.0);
    for (std::size_t r = 0; r < delta.size(); ++r) {
      const double d = delta[r];
      gb[r] += d;
      if (d == 0.0) continue;
      axpy(d, in, gw.row(r));
      axpy(d, layer.weight.row(r), d_in);
    }
    delta.swap(d_in);
  }
  return delta;
}

}  // namespace socialrec
