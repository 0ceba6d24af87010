#include "noisectx/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "noisectx/frontend.hpp"
#include "noisectx/io.hpp"
#include "noisectx/parameters.hpp"

namespace noisectx {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSilentPower = 1e-20;

class SourceRng {
 public:
  explicit SourceRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return unit_uniform(engine_()); }
  double normal() {
    // Box-Muller; u1 kept away from zero.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// Slow syllable-rate envelope in [0.1, 1]; rate jittered around `rate_hz`.
std::vector<double> envelope(SourceRng& rng, std::size_t samples, int sample_rate, double rate_hz) {
  const double rate = rate_hz * (0.75 + 0.5 * rng.uniform());
  const double phase = kTwoPi * rng.uniform();
  std::vector<double> env(samples);
  for (std::size_t n = 0; n < samples; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    env[n] = 0.55 + 0.45 * std::sin(kTwoPi * rate * t + phase);
  }
  return env;
}

}  // namespace

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::HarmonicTone:
      return "harmonic_tone";
    case SourceKind::Chirp:
      return "chirp";
    case SourceKind::White:
      return "white";
    case SourceKind::Pink:
      return "pink";
    case SourceKind::AmTone:
      return "am_tone";
    case SourceKind::AlternatingTone:
      return "alternating_tone";
    case SourceKind::WavFile:
      return "wav_file";
  }
  return "?";
}

SourceKind parse_source_kind(std::string_view text) {
  for (auto k : {SourceKind::HarmonicTone, SourceKind::Chirp, SourceKind::White, SourceKind::Pink,
                 SourceKind::AmTone, SourceKind::AlternatingTone, SourceKind::WavFile}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown source kind '" + std::string(text) + "'");
}

Waveform synthesize(const SourceSpec& spec, std::size_t samples, int sample_rate) {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(samples, 0.0);
  SourceRng rng(spec.seed);
  const double nyquist = sample_rate / 2.0;
  const double a = spec.amplitude;

  switch (spec.kind) {
    case SourceKind::HarmonicTone: {
      const auto env = envelope(rng, samples, sample_rate, spec.modulation_hz);
      std::vector<double> phases;
      for (std::size_t h = 1; h <= spec.harmonics; ++h) phases.push_back(kTwoPi * rng.uniform());
      for (std::size_t h = 1; h <= spec.harmonics; ++h) {
        const double f = spec.frequency_hz * static_cast<double>(h);
        if (f >= nyquist) break;
        const double weight = a / static_cast<double>(h);
        for (std::size_t n = 0; n < samples; ++n) {
          const double t = static_cast<double>(n) / sample_rate;
          w.samples[n] += weight * std::sin(kTwoPi * f * t + phases[h - 1]);
        }
      }
      for (std::size_t n = 0; n < samples; ++n) w.samples[n] *= env[n];
      break;
    }
    case SourceKind::Chirp: {
      const double duration = static_cast<double>(samples) / sample_rate;
      const double slope = duration > 0 ? (spec.second_frequency_hz - spec.frequency_hz) / duration : 0.0;
      const double phase = kTwoPi * rng.uniform();
      for (std::size_t n = 0; n < samples; ++n) {
        const double t = static_cast<double>(n) / sample_rate;
        w.samples[n] = a * std::sin(kTwoPi * (spec.frequency_hz * t + 0.5 * slope * t * t) + phase);
      }
      break;
    }
    case SourceKind::White:
      for (auto& s : w.samples) s = 0.5 * a * rng.normal();
      break;
    case SourceKind::Pink: {
      // Paul Kellet's refined pink filter over white noise.
      double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
      for (auto& s : w.samples) {
        const double white = rng.normal();
        b0 = 0.99886 * b0 + white * 0.0555179;
        b1 = 0.99332 * b1 + white * 0.0750759;
        b2 = 0.96900 * b2 + white * 0.1538520;
        b3 = 0.86650 * b3 + white * 0.3104856;
        b4 = 0.55000 * b4 + white * 0.5329522;
        b5 = -0.7616 * b5 - white * 0.0168980;
        s = (b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362) * 0.11 * a;
        b6 = white * 0.115926;
      }
      break;
    }
    case SourceKind::AmTone: {
      const auto env = envelope(rng, samples, sample_rate, spec.modulation_hz);
      const double phase = kTwoPi * rng.uniform();
      for (std::size_t n = 0; n < samples; ++n) {
        const double t = static_cast<double>(n) / sample_rate;
        w.samples[n] = a * env[n] * std::sin(kTwoPi * spec.frequency_hz * t + phase);
      }
      break;
    }
    case SourceKind::AlternatingTone: {
      const double phase = kTwoPi * rng.uniform();
      const double period = spec.modulation_hz > 0 ? 1.0 / spec.modulation_hz : 1.0;
      const double offset = rng.uniform() * period;
      for (std::size_t n = 0; n < samples; ++n) {
        const double t = static_cast<double>(n) / sample_rate;
        const bool second = std::fmod(t + offset, 2.0 * period) >= period;
        const double f = second ? spec.second_frequency_hz : spec.frequency_hz;
        w.samples[n] = a * std::sin(kTwoPi * f * t + phase);
      }
      break;
    }
    case SourceKind::WavFile: {
      Waveform file = read_wav(spec.path);
      if (file.sample_rate != sample_rate) {
        throw ConfigError("'" + spec.path.string() + "' is " + std::to_string(file.sample_rate) + " Hz, expected " +
                          std::to_string(sample_rate) + " Hz");
      }
      if (file.samples.size() < samples) {
        throw ContractError("'" + spec.path.string() + "' has " + std::to_string(file.samples.size()) +
                            " samples, " + std::to_string(samples) + " needed (noise too short)");
      }
      file.samples.resize(samples);
      return file;
    }
  }
  return w;
}

double signal_power(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (double s : samples) total += s * s;
  return total / static_cast<double>(samples.size());
}

MixResult mix_at_snr(const Waveform& speech, const Waveform& noise, double snr_db) {
  if (speech.samples.size() != noise.samples.size()) {
    throw DimensionError("mix_at_snr: speech has " + std::to_string(speech.samples.size()) + " samples, noise " +
                         std::to_string(noise.samples.size()));
  }
  if (speech.sample_rate != noise.sample_rate) throw ConfigError("mix_at_snr: sample rates differ");
  if (!std::isfinite(snr_db)) throw ConfigError("mix_at_snr: SNR must be finite");
  const double ps = signal_power(speech.samples);
  const double pn = signal_power(noise.samples);
  if (ps <= kSilentPower) throw ContractError("mix_at_snr: speech is silent, SNR undefined");
  if (pn <= kSilentPower) throw ContractError("mix_at_snr: noise is silent, SNR undefined");

  MixResult r;
  r.noise_gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  double peak = 0.0;
  for (std::size_t i = 0; i < speech.samples.size(); ++i) {
    peak = std::max(peak, std::abs(speech.samples[i] + r.noise_gain * noise.samples[i]));
  }
  r.rescale = peak > 1.0 ? 0.99 / peak : 1.0;

  const std::size_t n = speech.samples.size();
  r.speech_component = {std::vector<double>(n), speech.sample_rate};
  r.noise_component = {std::vector<double>(n), speech.sample_rate};
  r.noisy = {std::vector<double>(n), speech.sample_rate};
  for (std::size_t i = 0; i < n; ++i) {
    r.speech_component.samples[i] = r.rescale * speech.samples[i];
    r.noise_component.samples[i] = r.rescale * r.noise_gain * noise.samples[i];
    r.noisy.samples[i] = r.speech_component.samples[i] + r.noise_component.samples[i];
  }
  return r;
}

MixtureExample make_example(const SourceSpec& speech_spec, const SourceSpec& noise_spec, double snr_db,
                            const ExampleOptions& options, const FeatureExtractor& features) {
  const int sr = options.sample_rate;
  if (sr != features.config().sample_rate) throw ConfigError("example and feature sample rates differ");
  if (options.context_seconds < 0.0) throw ConfigError("context_seconds must be >= 0");
  const auto context_samples = static_cast<std::size_t>(std::lround(options.context_seconds * sr));
  if (context_samples > 0 && context_samples < features.config().window_samples()) {
    throw ConfigError("context shorter than one analysis window");
  }

  Waveform speech;
  if (speech_spec.kind == SourceKind::WavFile) {
    speech = read_wav(speech_spec.path);
    if (speech.sample_rate != sr) throw ConfigError("'" + speech_spec.path.string() + "' has the wrong sample rate");
  } else {
    const auto utterance = static_cast<std::size_t>(std::lround(options.utterance_seconds * sr));
    speech = synthesize(speech_spec, utterance, sr);
  }
  const std::size_t utterance = speech.samples.size();
  if (utterance < features.config().window_samples()) throw ConfigError("utterance shorter than one analysis window");

  const Waveform stream = synthesize(noise_spec, context_samples + utterance, sr);
  Waveform under_speech{std::vector<double>(stream.samples.begin() + static_cast<std::ptrdiff_t>(context_samples),
                                            stream.samples.end()),
                        sr};
  MixResult mix = mix_at_snr(speech, under_speech, snr_db);

  MixtureExample ex;
  ex.snr_db = snr_db;
  ex.noise_gain = mix.noise_gain;
  ex.rescale = mix.rescale;
  ex.context_samples = context_samples;
  ex.context_wave.sample_rate = sr;
  ex.context_wave.samples.resize(context_samples);
  const double context_gain = mix.rescale * mix.noise_gain;
  for (std::size_t i = 0; i < context_samples; ++i) ex.context_wave.samples[i] = context_gain * stream.samples[i];
  ex.clean_mel = features.mel_power(mix.speech_component);
  ex.noise_mel = features.mel_power(mix.noise_component);
  ex.irm = compute_irm({ex.clean_mel, ex.noise_mel});
  ex.noisy_wave = std::move(mix.noisy);
  ex.speech_wave = std::move(mix.speech_component);
  return ex;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int identity_task_class(std::uint64_t seed, std::size_t index) {
  return static_cast<int>(mix_seed(seed, index) >> 63);
}

std::array<SourceSpec, 2> identity_task_sources(const IdentityTaskOptions& options, std::size_t index) {
  const int cls = identity_task_class(options.seed, index);
  const std::uint64_t base = mix_seed(options.seed ^ 0x5eedULL, index);
  SourceSpec speech;
  speech.kind = SourceKind::HarmonicTone;
  speech.harmonics = 1;
  speech.frequency_hz = options.class_hz[1 - cls];
  speech.modulation_hz = options.modulation_hz;
  speech.seed = mix_seed(base, 1);
  SourceSpec noise;
  noise.kind = SourceKind::AmTone;
  noise.frequency_hz = options.class_hz[cls];
  noise.modulation_hz = options.modulation_hz;
  noise.seed = mix_seed(base, 2);
  return {speech, noise};
}

std::vector<IdentityExample> context_reveals_identity_task(const IdentityTaskOptions& options,
                                                           const FeatureExtractor& features) {
  ExampleOptions ex_opts;
  ex_opts.utterance_seconds = options.utterance_seconds;
  ex_opts.context_seconds = options.context_seconds;
  ex_opts.sample_rate = features.config().sample_rate;
  std::vector<IdentityExample> out;
  out.reserve(options.examples);
  for (std::size_t i = 0; i < options.examples; ++i) {
    const auto [speech, noise] = identity_task_sources(options, i);
    out.push_back({make_example(speech, noise, options.snr_db, ex_opts, features), identity_task_class(options.seed, i)});
  }
  return out;
}

}  // namespace noisectx
