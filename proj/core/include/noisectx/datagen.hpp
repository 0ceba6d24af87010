#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "noisectx/features.hpp"
#include "noisectx/tensor.hpp"

namespace noisectx {

enum class SourceKind {
  // target-signal kinds
  HarmonicTone,
  Chirp,
  // noise kinds
  White,
  Pink,
  AmTone,
  AlternatingTone,
  // either
  WavFile,
};

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view text);

/// Deterministic signal recipe. Fields a kind does not use are ignored.
struct SourceSpec {
  SourceKind kind = SourceKind::HarmonicTone;
  std::uint64_t seed = 0;
  double frequency_hz = 220.0;         // tone/fundamental, chirp start, first alternating tone
  double second_frequency_hz = 880.0;  // chirp end, second alternating tone
  std::size_t harmonics = 4;
  double modulation_hz = 4.0;          // amplitude-modulation rate; switching rate for alternating_tone
  double amplitude = 0.3;
  std::filesystem::path path;          // wav_file
};

/// `samples` samples of the source. A wav_file source must hold at least
/// that many samples (ContractError otherwise) and is truncated.
Waveform synthesize(const SourceSpec& spec, std::size_t samples, int sample_rate = 16000);

struct MixResult {
  Waveform noisy;
  double noise_gain = 1.0;        // applied to the raw noise before rescaling
  double rescale = 1.0;           // joint anti-clipping factor, 1 if none was needed
  Waveform speech_component;      // rescale * speech
  Waveform noise_component;       // rescale * noise_gain * noise
};

/// Mean square.
double signal_power(std::span<const double> samples);

/// Scales `noise` so that 10 log10(P_speech / P_noise) = snr_db (mean-square
/// powers over the given, equal-length segments) and adds it to `speech`.
/// If the mixture would leave [-1, 1], both components are scaled by
/// 0.99 / peak, which leaves the SNR unchanged.
MixResult mix_at_snr(const Waveform& speech, const Waveform& noise, double snr_db);

struct ExampleOptions {
  double utterance_seconds = 2.0;
  /// Noise-only prefix; 0 produces an example without context.
  double context_seconds = 6.0;
  int sample_rate = 16000;
};

struct MixtureExample {
  Waveform context_wave;  // noise only, precedes the utterance
  Waveform noisy_wave;
  Waveform speech_wave;   // the scaled speech component inside noisy_wave
  TensorD clean_mel;      // Mel power of the scaled speech component
  TensorD noise_mel;      // Mel power of the scaled noise component
  TensorD irm;
  double snr_db = 0.0;
  double noise_gain = 1.0;
  double rescale = 1.0;
  /// The noise stream is one realization; samples [0, context_samples) form
  /// the context and the rest lies under the utterance.
  std::size_t context_samples = 0;

  bool has_context() const { return !context_wave.samples.empty(); }
};

/// One continuous noise stream covering context + utterance; the first
/// context_seconds become the context, the remainder is mixed with the
/// speech at snr_db. A wav_file speech source sets the utterance length.
MixtureExample make_example(const SourceSpec& speech, const SourceSpec& noise, double snr_db,
                            const ExampleOptions& options, const FeatureExtractor& features);

/// Probe task in which only the context tells the two noise classes apart:
/// class k noise is an amplitude-modulated tone at class_hz[k], and the
/// target is a statistically identical modulated tone at the other class's
/// frequency.
struct IdentityTaskOptions {
  std::size_t examples = 64;
  std::uint64_t seed = 1;
  double utterance_seconds = 1.0;
  double context_seconds = 6.0;
  double snr_db = 0.0;
  std::array<double, 2> class_hz = {500.0, 3000.0};
  double modulation_hz = 4.0;
};

struct IdentityExample {
  MixtureExample mixture;
  int noise_class = 0;
};

/// Noise class of example `index` under `seed` (0 or 1, equiprobable).
int identity_task_class(std::uint64_t seed, std::size_t index);

/// The signals used for example `index`.
std::array<SourceSpec, 2> identity_task_sources(const IdentityTaskOptions& options, std::size_t index);

std::vector<IdentityExample> context_reveals_identity_task(const IdentityTaskOptions& options,
                                                           const FeatureExtractor& features);

/// splitmix64 finalizer, used to derive independent per-example seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace noisectx
