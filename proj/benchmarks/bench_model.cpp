#include <benchmark/benchmark.h>

#include <random>

#include "noisectx/frontend.hpp"
#include "noisectx/ops.hpp"
#include "noisectx/parameters.hpp"

namespace {

using namespace noisectx;

TensorF random_features(std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TensorF t({frames, 128});
  for (auto& v : t.values()) v = static_cast<float>(-6.0 + 6.0 * unit_uniform(rng()));
  return t;
}

FrontendConfig desk_config(Variant v) {
  FrontendConfig c = FrontendConfig::for_variant(v);
  c.d = 32;
  c.speech_layers = v == Variant::E0 ? 4 : 2;
  return c;
}

// Forward + backward of one 1 s utterance with a 2 s context at d = 32.
void BM_TrainingStep(benchmark::State& state) {
  const Frontend model(desk_config(static_cast<Variant>(state.range(0))));
  const NamedTensors<float> params = model.initialize<float>(1);
  const TensorF noisy = random_features(97, 2), context = random_features(197, 3);
  const TensorF target(noisy.shape(), 0.5f);
  for (auto _ : state) {
    Graph<float> g(&params);
    std::optional<Var<float>> ctx;
    if (model.config().uses_context()) ctx = g.constant(context);
    auto loss = l1_l2_loss(model.forward(g, g.constant(noisy), ctx), target, noisy.rows());
    benchmark::DoNotOptimize(g.backward(loss).size());
  }
}
BENCHMARK(BM_TrainingStep)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_InferenceFullContext(benchmark::State& state) {
  const Frontend model(FrontendConfig::for_variant(Variant::E3));
  const NamedTensors<float> params = model.initialize<float>(1);
  const TensorF noisy = random_features(97, 2), context = random_features(597, 3);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(params, noisy, &context).data());
}
BENCHMARK(BM_InferenceFullContext)->Unit(benchmark::kMillisecond);

}  // namespace
