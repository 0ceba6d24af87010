#pragma once

#include <cstddef>
#include <vector>

#include "noisectx/tensor.hpp"

namespace noisectx {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Log-Mel analysis constants. Input audio and noise context always share
/// one instance.
struct FeatureConfig {
  int sample_rate = 16000;
  double window_seconds = 0.032;
  double hop_seconds = 0.010;
  std::size_t num_mels = 128;
  double min_hz = 125.0;
  double max_hz = 7500.0;
  double mel_floor = 1e-3;

  std::size_t window_samples() const;
  std::size_t hop_samples() const;
  /// Window length rounded up to a power of two.
  std::size_t fft_size() const;
  std::size_t num_bins() const { return fft_size() / 2 + 1; }
  /// 1 + floor((samples - window) / hop), or 0 when shorter than a window.
  std::size_t num_frames(std::size_t samples) const;
  void validate() const;
};

/// Log-Mel frames [T x num_mels] with the framing they were computed with.
struct FeatureSequence {
  TensorD frames;
  double hop_seconds = 0.010;
  double window_seconds = 0.032;

  std::size_t num_frames() const { return frames.rows(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Edge frequencies of the triangular filters: num_mels + 2 points evenly
/// spaced on the HTK Mel scale between min_hz and max_hz.
std::vector<double> mel_edges_hz(const FeatureConfig& config);

/// Triangular Mel filterbank [num_bins x num_mels]. Each weight is the
/// triangle's integral over the bin's frequency interval divided by the bin
/// width, so every filter touches at least one bin even where filters are
/// narrower than the bin spacing.
TensorD mel_filterbank(const FeatureConfig& config);

/// Hann-windowed squared-magnitude spectrum [T x num_bins].
TensorD stft_power(const Waveform& wave, const FeatureConfig& config);

/// power [T x F] . filterbank [F x M]
TensorD mel_project(const TensorD& power, const TensorD& filterbank);

/// log(max(mel, mel_floor)) elementwise.
FeatureSequence log_compress(const TensorD& mel, const FeatureConfig& config);

class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig config = {});

  const FeatureConfig& config() const noexcept { return config_; }
  const TensorD& filterbank() const noexcept { return filterbank_; }

  /// Mel power [T x num_mels] (pre-log).
  TensorD mel_power(const Waveform& wave) const;
  FeatureSequence log_mel(const Waveform& wave) const;

 private:
  FeatureConfig config_;
  TensorD filterbank_;
};

}  // namespace noisectx
