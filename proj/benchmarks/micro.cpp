#include <cstddef>
#include <vector>

#include <benchmark/benchmark.h>

#include "socialrec/ccm.hpp"
#include "socialrec/dense_net.hpp"
#include "socialrec/metrics.hpp"
#include "socialrec/rng.hpp"
#include "socialrec/social_graph.hpp"
#include "socialrec/synthetic.hpp"

namespace socialrec {
namespace {

std::vector<double> uniform_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform01(rng) * 2.0 - 1.0;
  return v;
}

// Tower shaped network: 64 -> width -> width / 2 -> 32.
void BM_DenseForwardBackward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(1, "bench.dense");
  const std::size_t dims[] = {64, width, width / 2, 32};
  const auto net = DenseNet::make(dims, Activation::kLeakyRelu, Activation::kIdentity, rng);
  const auto x = uniform_vector(rng, 64);
  const auto d_out = uniform_vector(rng, 32);
  ForwardCache cache;
  DenseNetGrad grad(net);
  for (auto _ : state) {
    forward(net, x, cache);
    benchmark::DoNotOptimize(backward(net, cache, d_out, grad));
  }
}
BENCHMARK(BM_DenseForwardBackward)->Arg(64)->Arg(256);

void BM_AssignGroup(benchmark::State& state) {
  const auto groups = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(2, "bench.assign");
  const Tensor2 prototypes(groups, 64, uniform_vector(rng, groups * 64));
  const auto z = uniform_vector(rng, 64);
  for (auto _ : state) benchmark::DoNotOptimize(assign_group(prototypes, z));
}
BENCHMARK(BM_AssignGroup)->Arg(8)->Arg(32)->Arg(128);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(3, "bench.auc");
  const auto scores = uniform_vector(rng, n);
  std::vector<int> labels(n);
  for (auto& l : labels) l = bernoulli(rng, 0.3) ? 1 : 0;
  labels[0] = 1;
  labels[1] = 0;
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

void BM_SocialEmbeddings(benchmark::State& state) {
  WorldConfig world;
  const auto graph = generate_world(world).graph;
  Rng rng = make_rng(4, "bench.social");
  const std::vector<std::size_t> dims(graph.relation_count(), 16);
  const auto table = EntityEmbeddingTable::random(graph, dims, 0.5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(social_embeddings(graph, table));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * graph.user_count()));
}
BENCHMARK(BM_SocialEmbeddings);

}  // namespace
}  // namespace socialrec

// The distro's benchmark_main archive carries LTO bytecode from another compiler release.
BENCHMARK_MAIN();
