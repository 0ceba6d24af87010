#include <benchmark/benchmark.h>

#include <random>

#include "noisectx/ops.hpp"
#include "noisectx/parameters.hpp"

namespace {

using namespace noisectx;

TensorF random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TensorF t({r, c});
  for (auto& v : t.values()) v = static_cast<float>(unit_uniform(rng()) - 0.5);
  return t;
}

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TensorF a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Graph<float> g;
    benchmark::DoNotOptimize(matmul(g.constant(a), g.constant(b)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TensorF a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Graph<float> g;
    auto loss = sum(matmul(g.variable(a), g.variable(b)));
    benchmark::DoNotOptimize(g.backward(loss).size());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_SoftmaxMasked(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TensorF logits = random_matrix(n, n, 3);
  const TensorF mask = make_attention_mask<float>(n, n, true, 64);
  for (auto _ : state) {
    Graph<float> g;
    benchmark::DoNotOptimize(softmax_masked(g.constant(logits), mask).value().data());
  }
}
BENCHMARK(BM_SoftmaxMasked)->Arg(100)->Arg(400);

}  // namespace
