#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>

#include "noisectx/checkpoint.hpp"
#include "noisectx/datagen.hpp"
#include "noisectx/errors.hpp"
#include "noisectx/frontend.hpp"
#include "noisectx/grad_check.hpp"
#include "noisectx/io.hpp"
#include "noisectx/trainer.hpp"
#include "noisectx_cli/cli.hpp"

namespace fs = std::filesystem;

namespace noisectx::cli {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // model
      "variant", "d", "speech_layers", "noise_layers", "cross_layers", "heads", "kernel", "lookback", "feature_dim",
      "alpha", "beta",
      // training
      "seed", "lr", "batch", "epochs", "manifest", "val_manifest", "out", "init",
      // data generation
      "task", "examples", "snrs", "utterance_seconds", "context_seconds", "speech_kind", "noise_kind", "speech_wav",
      "noise_wav",
      // enhance / eval
      "checkpoint", "noisy", "context", "mask",
      // grad-check
      "frames", "context_frames", "tolerance", "samples", "fault_op", "fault_scale"};
  return keys;
}

std::string require(const KeyValueConfig& cfg, const std::string& key) {
  auto v = cfg.get(key);
  if (!v || v->empty()) throw ConfigError("missing required setting '" + key + "'");
  return *v;
}

std::uint64_t seed_of(const KeyValueConfig& cfg) {
  const long s = cfg.get_int("seed", 1);
  if (s < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

FrontendConfig model_config(const KeyValueConfig& cfg, FrontendConfig (*defaults)(Variant)) {
  const Variant v = parse_variant(cfg.get_string("variant", "E3"));
  FrontendConfig c = FrontendConfig::from_config(cfg, defaults(v));
  c.validate();
  return c;
}

std::string format_snr(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr);
  return buf;
}

FeatureSequence power_dump(const TensorD& mel, const FeatureConfig& fc) {
  return FeatureSequence{mel, fc.hop_seconds, fc.window_seconds};
}

ModelCheckpoint load_checkpoint(const std::string& path) { return from_archive(CheckpointArchive::load(path)); }

// ---------------------------------------------------------------- gen-data

struct GenDataSettings {
  fs::path out;
  std::string task;
  std::size_t examples = 16;
  std::vector<double> snrs;
  double utterance_seconds = 1.0;
  double context_seconds = 6.0;
  std::uint64_t seed = 1;
  SourceKind speech_kind = SourceKind::HarmonicTone;
  SourceKind noise_kind = SourceKind::Pink;
  fs::path speech_wav;
  fs::path noise_wav;
};

GenDataSettings gen_data_settings(const KeyValueConfig& cfg) {
  GenDataSettings s;
  s.out = require(cfg, "out");
  s.task = cfg.get_string("task", "identity");
  if (s.task != "identity" && s.task != "synthetic") throw ConfigError("task must be 'identity' or 'synthetic'");
  s.examples = cfg.get_size("examples", s.examples);
  if (s.examples == 0) throw ConfigError("examples must be positive");
  s.snrs = cfg.get_doubles("snrs", {0.0});
  if (s.snrs.empty()) throw ConfigError("snrs must list at least one value");
  s.utterance_seconds = cfg.get_double("utterance_seconds", s.utterance_seconds);
  s.context_seconds = cfg.get_double("context_seconds", s.context_seconds);
  if (!(s.utterance_seconds > 0.0)) throw ConfigError("utterance_seconds must be positive");
  if (!(s.context_seconds >= 0.0)) throw ConfigError("context_seconds must be >= 0");
  s.seed = seed_of(cfg);
  s.speech_kind = parse_source_kind(cfg.get_string("speech_kind", "harmonic_tone"));
  s.noise_kind = parse_source_kind(cfg.get_string("noise_kind", "pink"));
  if (s.speech_kind != SourceKind::HarmonicTone && s.speech_kind != SourceKind::Chirp &&
      s.speech_kind != SourceKind::WavFile) {
    throw ConfigError("speech_kind must be harmonic_tone, chirp or wav_file");
  }
  if (s.noise_kind == SourceKind::HarmonicTone || s.noise_kind == SourceKind::Chirp) {
    throw ConfigError("noise_kind must be white, pink, am_tone, alternating_tone or wav_file");
  }
  s.speech_wav = cfg.get_string("speech_wav", "");
  s.noise_wav = cfg.get_string("noise_wav", "");
  if (s.task == "synthetic" && s.speech_kind == SourceKind::WavFile && s.speech_wav.empty()) {
    throw ConfigError("speech_kind=wav_file needs speech_wav");
  }
  if (s.task == "synthetic" && s.noise_kind == SourceKind::WavFile && s.noise_wav.empty()) {
    throw ConfigError("noise_kind=wav_file needs noise_wav");
  }
  return s;
}

std::array<SourceSpec, 2> synthetic_sources(const GenDataSettings& s, std::size_t index) {
  const std::uint64_t base = mix_seed(s.seed, index);
  auto u = [&](std::uint64_t k) { return unit_uniform(mix_seed(base, k)); };
  SourceSpec speech;
  speech.kind = s.speech_kind;
  speech.seed = mix_seed(base, 100);
  speech.frequency_hz = 100.0 + 200.0 * u(1);
  speech.second_frequency_hz = 400.0 + 1600.0 * u(2);
  speech.path = s.speech_wav;
  SourceSpec noise;
  noise.kind = s.noise_kind;
  noise.seed = mix_seed(base, 200);
  noise.frequency_hz = 300.0 + 2700.0 * u(3);
  noise.second_frequency_hz = 500.0 + 3000.0 * u(4);
  noise.modulation_hz = 1.0 + 3.0 * u(5);
  noise.path = s.noise_wav;
  return {speech, noise};
}

// ---------------------------------------------------------------- train

struct TrainSettings {
  FrontendConfig model;
  fs::path manifest;
  fs::path val_manifest;
  fs::path out;
  fs::path init;
  TrainOptions options;
};

TrainSettings train_settings(const KeyValueConfig& cfg) {
  TrainSettings s;
  s.model = model_config(cfg, &FrontendConfig::for_variant);
  s.manifest = require(cfg, "manifest");
  s.val_manifest = cfg.get_string("val_manifest", "");
  s.out = require(cfg, "out");
  s.init = cfg.get_string("init", "");
  s.options.epochs = cfg.get_size("epochs", 10);
  s.options.batch_size = cfg.get_size("batch", 8);
  s.options.seed = seed_of(cfg);
  s.options.adam.lr = cfg.get_double("lr", s.options.adam.lr);
  if (s.options.batch_size == 0) throw ConfigError("batch must be positive");
  if (!(s.options.adam.lr >= 0.0)) throw ConfigError("lr must be >= 0");
  return s;
}

void check_context(const Dataset& data, const FrontendConfig& model, const fs::path& manifest) {
  std::size_t with_context = 0;
  for (const auto& ex : data) {
    if (ex.context) {
      ++with_context;
    } else if (model.uses_context()) {
      throw ConfigError("variant " + std::string(to_string(model.variant)) + " requires noise context, but record '" +
                        ex.id + "' in '" + manifest.string() + "' has none");
    }
  }
  if (!model.uses_context() && with_context > 0) {
    spdlog::info("variant E0 ignores the noise context of {} records", with_context);
  }
}

nlohmann::json epoch_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"step", r.step}, {"loss", r.loss}, {"val_loss", r.val_loss},
          {"val_snri_db", r.val_snri_db}};
}

void print_metrics(const std::string& label, const ConditionMetrics& m) {
  std::printf("%s examples=%zu loss=%.6f snri_db=%.6f\n", label.c_str(), m.examples, m.mean_loss, m.snri_db);
}

}  // namespace

void check_known_keys(const KeyValueConfig& cfg) {
  for (const auto& [key, _] : cfg.entries()) {
    if (!known_keys().contains(key)) throw ConfigError("unknown setting '" + key + "'");
  }
}

int cmd_gen_data(const KeyValueConfig& cfg) {
  const GenDataSettings s = gen_data_settings(cfg);
  const FeatureExtractor fx;
  ExampleOptions ex_opts;
  ex_opts.utterance_seconds = s.utterance_seconds;
  ex_opts.context_seconds = s.context_seconds;

  IdentityTaskOptions identity;
  identity.seed = s.seed;

  std::vector<ManifestRecord> records;
  for (std::size_t c = 0; c < s.snrs.size(); ++c) {
    const std::string dir = "snr_" + format_snr(s.snrs[c]);
    fs::create_directories(s.out / dir);
    for (std::size_t k = 0; k < s.examples; ++k) {
      const std::size_t index = c * s.examples + k;
      const auto [speech, noise] =
          s.task == "identity" ? identity_task_sources(identity, index) : synthetic_sources(s, index);
      const MixtureExample ex = make_example(speech, noise, s.snrs[c], ex_opts, fx);

      char id[32];
      std::snprintf(id, sizeof id, "ex%05zu", index);
      ManifestRecord rec;
      rec.id = id;
      rec.snr_db = s.snrs[c];
      const fs::path stem = fs::path(dir) / id;
      if (ex.has_context()) {
        rec.context_wav = stem.string() + "_context.wav";
        write_wav(s.out / rec.context_wav, ex.context_wave);
      }
      rec.noisy_wav = stem.string() + "_noisy.wav";
      rec.clean_mel = stem.string() + "_clean.ncfd";
      rec.noise_mel = stem.string() + "_noise.ncfd";
      write_wav(s.out / rec.noisy_wav, ex.noisy_wave);
      write_wav(s.out / (stem.string() + "_clean.wav"), ex.speech_wave);
      write_feature_dump(s.out / rec.clean_mel, power_dump(ex.clean_mel, fx.config()));
      write_feature_dump(s.out / rec.noise_mel, power_dump(ex.noise_mel, fx.config()));
      if (ex.rescale != 1.0) spdlog::debug("{}: anti-clipping rescale {}", rec.id, ex.rescale);
      records.push_back(std::move(rec));
    }
    spdlog::info("wrote {} examples to {}", s.examples, (s.out / dir).string());
  }
  const fs::path manifest = s.out / "manifest.tsv";
  write_manifest(manifest, records);
  std::printf("%s\n", manifest.string().c_str());
  return kOk;
}

int cmd_train(const KeyValueConfig& cfg) {
  TrainSettings s = train_settings(cfg);
  const Frontend model(s.model);
  std::optional<ModelCheckpoint> start;
  if (!s.init.empty()) {
    start = load_checkpoint(s.init.string());
    if (start->config.to_config().to_text() != s.model.to_config().to_text()) {
      throw ConfigError("checkpoint '" + s.init.string() + "' was trained with a different model configuration");
    }
  }

  const FeatureExtractor fx;
  const Dataset training = load_dataset(s.manifest, fx);
  check_context(training, s.model, s.manifest);
  Dataset validation;
  if (!s.val_manifest.empty()) {
    validation = load_dataset(s.val_manifest, fx);
    check_context(validation, s.model, s.val_manifest);
  } else {
    spdlog::info("no val_manifest: validation metrics use the training set");
  }

  fs::create_directories(s.out);
  const fs::path log_path = s.out / "train_log.jsonl";
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot write '" + log_path.string() + "'");
  s.options.checkpoint_dir = s.out;
  s.options.on_epoch = [&](const EpochRecord& r) {
    log << epoch_json(r).dump() << '\n';
    log.flush();
    spdlog::info("epoch {} step {} loss {:.6f} val_loss {:.6f} val_snri_db {:.3f}", r.epoch, r.step, r.loss,
                 r.val_loss, r.val_snri_db);
  };

  spdlog::info("training {} ({} parameters) on {} examples", to_string(s.model.variant), count_parameters(s.model),
               training.size());
  const TrainResult result = start ? train(model, *start, training, validation, s.options)
                                   : train(model, training, validation, s.options);
  if (!log) throw IoError("failed writing '" + log_path.string() + "'");
  to_archive(result.final_state).save(s.out / "final.ckpt");
  std::printf("%s\n", (s.out / "final.ckpt").string().c_str());
  return kOk;
}

int cmd_enhance(const KeyValueConfig& cfg) {
  const std::string ckpt_path = require(cfg, "checkpoint");
  const std::string noisy_path = require(cfg, "noisy");
  const std::string out_path = require(cfg, "out");
  const std::string context_path = cfg.get_string("context", "");

  const ModelCheckpoint ckpt = load_checkpoint(ckpt_path);
  const Frontend model(ckpt.config);
  if (model.config().uses_context() && context_path.empty()) {
    throw ConfigError("variant " + std::string(to_string(model.config().variant)) + " requires a noise context");
  }
  if (!model.config().uses_context() && !context_path.empty()) {
    spdlog::warn("variant E0 ignores the supplied context '{}'", context_path);
  }

  const FeatureExtractor fx;
  const TensorD noisy_mel = fx.mel_power(read_wav(noisy_path));
  const TensorF noisy = log_compress(noisy_mel, fx.config()).frames.cast<float>();
  std::optional<TensorF> context;
  if (model.config().uses_context()) context = fx.log_mel(read_wav(context_path)).frames.cast<float>();

  const TensorD mask = model.infer<float>(ckpt.params, noisy, context ? &*context : nullptr).cast<double>();
  const FeatureSequence enhanced =
      apply_mask(noisy_mel, mask, model.config().alpha, model.config().beta, fx.config());
  write_feature_dump(out_path, enhanced);
  std::printf("%s\n", out_path.c_str());
  return kOk;
}

int cmd_eval(const KeyValueConfig& cfg) {
  const std::string manifest = require(cfg, "manifest");
  const std::string mask_kind = cfg.get_string("mask", "model");
  if (mask_kind != "model" && mask_kind != "identity" && mask_kind != "oracle") {
    throw ConfigError("mask must be model, identity or oracle");
  }
  std::optional<ModelCheckpoint> ckpt;
  if (mask_kind == "model") ckpt = load_checkpoint(require(cfg, "checkpoint"));
  const FrontendConfig defaults;
  const double alpha = ckpt ? ckpt->config.alpha : cfg.get_double("alpha", defaults.alpha);
  const double beta = ckpt ? ckpt->config.beta : cfg.get_double("beta", defaults.beta);

  const FeatureExtractor fx;
  const Dataset data = load_dataset(manifest, fx);
  EvalReport report;
  if (ckpt) {
    const Frontend model(ckpt->config);
    check_context(data, model.config(), manifest);
    report = eval_metrics(model, ckpt->params, data);
  } else if (mask_kind == "identity") {
    report = evaluate_masks(
        data, [](const TrainingExample& ex) { return TensorD(ex.irm.shape(), 1.0); }, alpha, beta);
  } else {
    report = evaluate_masks(data, [](const TrainingExample& ex) { return ex.irm; }, alpha, beta);
  }
  for (const auto& [snr, m] : report.by_snr) print_metrics("snr_db=" + format_snr(snr), m);
  print_metrics("overall", report.overall);
  return kOk;
}

int cmd_grad_check(const KeyValueConfig& cfg) {
  const FrontendConfig mc = model_config(cfg, &tiny_config);
  const std::size_t frames = cfg.get_size("frames", 5);
  const std::size_t context_frames = cfg.get_size("context_frames", 7);
  GradCheckOptions opts;
  opts.tolerance = cfg.get_double("tolerance", opts.tolerance);
  opts.samples_per_tensor = cfg.get_size("samples", opts.samples_per_tensor);
  opts.fault_op = cfg.get_string("fault_op", "");
  opts.fault_scale = cfg.get_double("fault_scale", 2.0);
  const std::uint64_t seed = seed_of(cfg);
  opts.seed = seed;
  if (frames == 0 || context_frames == 0) throw ConfigError("frames and context_frames must be positive");
  if (!(opts.tolerance > 0.0)) throw ConfigError("tolerance must be positive");

  const Frontend model(mc);
  const NamedTensors<double> params = model.initialize<double>(seed);
  const GradCheckInputs inputs = random_grad_check_inputs(mc, frames, context_frames, seed);
  const GradCheckReport report = grad_check_frontend(model, params, inputs, opts);
  for (const auto& b : report.blocks) {
    spdlog::debug("{:<40} checked {:>3} max_rel_error {:.3e}", b.name, b.checked, b.max_rel_error);
  }
  std::printf("grad-check %s: %zu tensors, max_rel_error=%.3e, tolerance=%.1e: %s\n",
              std::string(to_string(mc.variant)).c_str(), report.blocks.size(), report.max_rel_error, opts.tolerance,
              report.passed() ? "PASS" : "FAIL");
  for (const auto& name : report.failing) std::printf("  failing: %s\n", name.c_str());
  return report.passed() ? kOk : kNumerical;
}

int cmd_param_count(const KeyValueConfig& cfg) {
  const FrontendConfig mc = model_config(cfg, &FrontendConfig::for_variant);
  std::printf("%zu\n", count_parameters(mc));
  return kOk;
}

}  // namespace noisectx::cli
