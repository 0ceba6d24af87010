#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "noisectx/features.hpp"

namespace {

using namespace noisectx;

void BM_LogMel(benchmark::State& state) {
  const FeatureExtractor fx;
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(state.range(0)) * 16000);
  for (std::size_t n = 0; n < w.samples.size(); ++n) {
    w.samples[n] = 0.3 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(n) / 16000.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fx.log_mel(w).frames.data());
  state.SetLabel(std::to_string(state.range(0)) + " s audio");
}
BENCHMARK(BM_LogMel)->Arg(1)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace
