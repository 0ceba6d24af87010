#include "noisectx/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>

namespace noisectx {
namespace {

// Planner calls are not thread-safe in FFTW.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Integral of the unit-peak triangle (left, center, right) from -inf to x.
double triangle_integral(double x, double left, double center, double right) {
  if (x <= left) return 0.0;
  if (x <= center) return (x - left) * (x - left) / (2.0 * (center - left));
  if (x <= right) {
    return (center - left) / 2.0 + (right - center) / 2.0 - (right - x) * (right - x) / (2.0 * (right - center));
  }
  return (right - left) / 2.0;
}

}  // namespace

std::size_t FeatureConfig::window_samples() const {
  return static_cast<std::size_t>(std::lround(window_seconds * sample_rate));
}

std::size_t FeatureConfig::hop_samples() const {
  return static_cast<std::size_t>(std::lround(hop_seconds * sample_rate));
}

std::size_t FeatureConfig::fft_size() const { return std::bit_ceil(window_samples()); }

std::size_t FeatureConfig::num_frames(std::size_t samples) const {
  const std::size_t win = window_samples();
  if (samples < win) return 0;
  return 1 + (samples - win) / hop_samples();
}

void FeatureConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (window_samples() == 0 || hop_samples() == 0) throw ConfigError("window and hop must span >= 1 sample");
  if (num_mels == 0) throw ConfigError("need at least one Mel filter");
  if (!(min_hz >= 0.0 && min_hz < max_hz && max_hz <= sample_rate / 2.0)) {
    throw ConfigError("Mel range must satisfy 0 <= min_hz < max_hz <= Nyquist");
  }
  if (!(mel_floor > 0.0)) throw ConfigError("mel_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_edges_hz(const FeatureConfig& config) {
  const double lo = hz_to_mel(config.min_hz);
  const double hi = hz_to_mel(config.max_hz);
  const std::size_t points = config.num_mels + 2;
  std::vector<double> edges(points);
  for (std::size_t i = 0; i < points; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  edges.front() = config.min_hz;
  edges.back() = config.max_hz;
  return edges;
}

TensorD mel_filterbank(const FeatureConfig& config) {
  config.validate();
  const std::size_t bins = config.num_bins();
  const double bin_hz = static_cast<double>(config.sample_rate) / static_cast<double>(config.fft_size());
  const std::vector<double> edges = mel_edges_hz(config);
  TensorD fb({bins, config.num_mels});
  for (std::size_t m = 0; m < config.num_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double lo = (static_cast<double>(k) - 0.5) * bin_hz;
      const double hi = (static_cast<double>(k) + 0.5) * bin_hz;
      if (hi <= left || lo >= right) continue;
      fb(k, m) = (triangle_integral(hi, left, center, right) - triangle_integral(lo, left, center, right)) / bin_hz;
    }
  }
  return fb;
}

TensorD stft_power(const Waveform& wave, const FeatureConfig& config) {
  config.validate();
  if (wave.sample_rate != config.sample_rate) {
    throw ConfigError("waveform at " + std::to_string(wave.sample_rate) + " Hz, features expect " +
                      std::to_string(config.sample_rate) + " Hz");
  }
  const std::size_t win = config.window_samples();
  const std::size_t hop = config.hop_samples();
  const std::size_t nfft = config.fft_size();
  const std::size_t frames = config.num_frames(wave.samples.size());
  if (frames == 0) {
    throw ContractError("waveform of " + std::to_string(wave.samples.size()) + " samples is shorter than one " +
                        std::to_string(win) + "-sample window");
  }
  std::vector<double> window(win);
  for (std::size_t n = 0; n < win; ++n) {
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(win));
  }

  const std::size_t bins = nfft / 2 + 1;
  std::vector<double> frame(nfft, 0.0);
  std::vector<fftw_complex> spectrum(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), frame.data(), spectrum.data(), FFTW_ESTIMATE);
  }

  TensorD power({frames, bins});
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = wave.samples.data() + t * hop;
    for (std::size_t n = 0; n < win; ++n) frame[n] = src[n] * window[n];
    std::fill(frame.begin() + static_cast<std::ptrdiff_t>(win), frame.end(), 0.0);
    fftw_execute(plan);
    for (std::size_t k = 0; k < bins; ++k) {
      power(t, k) = spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1];
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return power;
}

TensorD mel_project(const TensorD& power, const TensorD& filterbank) {
  if (power.rank() != 2 || filterbank.rank() != 2 || power.cols() != filterbank.rows()) {
    throw DimensionError("mel_project: power " + shape_str(power.shape()) + " vs filterbank " +
                         shape_str(filterbank.shape()));
  }
  const std::size_t frames = power.rows(), bins = power.cols(), mels = filterbank.cols();
  TensorD mel({frames, mels});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double p = power(t, k);
      if (p == 0.0) continue;
      for (std::size_t m = 0; m < mels; ++m) mel(t, m) += p * filterbank(k, m);
    }
  }
  return mel;
}

FeatureSequence log_compress(const TensorD& mel, const FeatureConfig& config) {
  TensorD out = mel;
  for (auto& v : out.values()) v = std::log(std::max(v, config.mel_floor));
  return {std::move(out), config.hop_seconds, config.window_seconds};
}

FeatureExtractor::FeatureExtractor(FeatureConfig config)
    : config_(config), filterbank_(mel_filterbank(config_)) {}

TensorD FeatureExtractor::mel_power(const Waveform& wave) const {
  return mel_project(stft_power(wave, config_), filterbank_);
}

FeatureSequence FeatureExtractor::log_mel(const Waveform& wave) const {
  return log_compress(mel_power(wave), config_);
}

}  // namespace noisectx
