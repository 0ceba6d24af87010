#include "noisectx_cli/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>

#include "commands.hpp"
#include "noisectx/errors.hpp"

namespace noisectx::cli {
namespace {

void configure_logging() {
  static const std::map<std::string, spdlog::level::level_enum> levels = {
      {"trace", spdlog::level::trace}, {"debug", spdlog::level::debug}, {"info", spdlog::level::info},
      {"warn", spdlog::level::warn},   {"error", spdlog::level::err},   {"off", spdlog::level::off}};
  auto logger = std::make_shared<spdlog::logger>("noisectx", std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv(kLogEnv); env != nullptr && *env != '\0') {
    if (auto it = levels.find(env); it != levels.end()) {
      spdlog::set_level(it->second);
    } else {
      spdlog::warn("{}='{}' is not a log level; using info", kLogEnv, env);
    }
  }
}

struct Command {
  CLI::App* app;
  std::function<int(const KeyValueConfig&)> run;
};

// Registers `--flag` that writes its value to `key` in the override set.
void bind(CLI::App* app, KeyValueConfig& overrides, const std::string& flag, const std::string& key,
          const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&overrides, key](const std::string& v) { overrides.set(key, v); }, help);
}

void bind_model_flags(CLI::App* app, KeyValueConfig& overrides) {
  bind(app, overrides, "--d", "d", "model dimension");
  bind(app, overrides, "--heads", "heads", "attention heads");
  bind(app, overrides, "--speech-layers", "speech_layers", "speech encoder layers");
  bind(app, overrides, "--noise-layers", "noise_layers", "noise encoder layers");
  bind(app, overrides, "--cross-layers", "cross_layers", "cross-attention layers");
  bind(app, overrides, "--lookback", "lookback", "self-attention lookback in frames (-1 = unlimited)");
  bind(app, overrides, "--kernel", "kernel", "depthwise conv kernel size");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  configure_logging();

  CLI::App app{"Noise-context speech enhancement frontend", args.empty() ? "noisectx" : args[0]};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "noisectx 0.1.0");

  KeyValueConfig overrides;
  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key=value settings file (flags override it)");
  bind(&app, overrides, "--seed", "seed", "random seed");
  app.add_option_function<std::string>(
         "--variant", [&](const std::string& v) { overrides.set("variant", v); }, "model variant")
      ->check(CLI::IsMember({"E0", "E1", "E2", "E3"}));
  app.add_option("--set", sets, "extra KEY=VALUE setting (repeatable)");

  std::vector<Command> commands;

  auto* gen = app.add_subcommand("gen-data", "synthesize a dataset and its manifest");
  bind(gen, overrides, "--out", "out", "output directory");
  bind(gen, overrides, "--examples", "examples", "examples per SNR condition");
  bind(gen, overrides, "--snrs", "snrs", "comma-separated SNR list in dB");
  bind(gen, overrides, "--task", "task", "identity | synthetic");
  bind(gen, overrides, "--utterance-seconds", "utterance_seconds", "utterance length");
  bind(gen, overrides, "--context-seconds", "context_seconds", "noise-only context length (0 = none)");
  bind(gen, overrides, "--speech-kind", "speech_kind", "harmonic_tone | chirp | wav_file");
  bind(gen, overrides, "--noise-kind", "noise_kind", "white | pink | am_tone | alternating_tone | wav_file");
  bind(gen, overrides, "--speech-wav", "speech_wav", "speech WAV for speech_kind=wav_file");
  bind(gen, overrides, "--noise-wav", "noise_wav", "noise WAV for noise_kind=wav_file");
  commands.push_back({gen, cmd_gen_data});

  auto* tr = app.add_subcommand("train", "train a model on a manifest");
  bind(tr, overrides, "--manifest", "manifest", "training manifest");
  bind(tr, overrides, "--val-manifest", "val_manifest", "validation manifest");
  bind(tr, overrides, "--out", "out", "output directory for checkpoints and the log");
  bind(tr, overrides, "--epochs", "epochs", "training epochs");
  bind(tr, overrides, "--batch", "batch", "batch size");
  bind(tr, overrides, "--lr", "lr", "Adam learning rate");
  bind(tr, overrides, "--init", "init", "checkpoint to resume from");
  bind_model_flags(tr, overrides);
  commands.push_back({tr, cmd_train});

  auto* en = app.add_subcommand("enhance", "write the enhanced log-Mel features of one utterance");
  bind(en, overrides, "--checkpoint", "checkpoint", "model checkpoint");
  bind(en, overrides, "--noisy", "noisy", "noisy WAV");
  bind(en, overrides, "--context", "context", "noise-context WAV");
  bind(en, overrides, "--out", "out", "output feature dump");
  commands.push_back({en, cmd_enhance});

  auto* ev = app.add_subcommand("eval", "mean loss and SNR improvement per condition");
  bind(ev, overrides, "--checkpoint", "checkpoint", "model checkpoint (mask=model)");
  bind(ev, overrides, "--manifest", "manifest", "evaluation manifest");
  bind(ev, overrides, "--mask", "mask", "model | identity | oracle");
  commands.push_back({ev, cmd_eval});

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the training gradients");
  bind(gc, overrides, "--frames", "frames", "input frames");
  bind(gc, overrides, "--context-frames", "context_frames", "context frames");
  bind(gc, overrides, "--tolerance", "tolerance", "maximum relative error");
  bind(gc, overrides, "--samples", "samples", "scalars checked per tensor");
  bind(gc, overrides, "--fault-op", "fault_op", "corrupt the backward of this op (test fixture)");
  bind(gc, overrides, "--fault-scale", "fault_scale", "gradient scale of the corrupted op");
  bind_model_flags(gc, overrides);
  commands.push_back({gc, cmd_grad_check});

  auto* pc = app.add_subcommand("param-count", "print the trainable parameter count");
  bind_model_flags(pc, overrides);
  commands.push_back({pc, cmd_param_count});

  try {
    std::vector<std::string> argv(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    KeyValueConfig cfg;
    if (!config_path.empty()) cfg = KeyValueConfig::load(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
      overrides.set(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.merge(overrides);
    check_known_keys(cfg);
    for (const auto& c : commands) {
      if (c.app->parsed()) return c.run(cfg);
    }
    return kUsage;
  } catch (const NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kNumerical;
  } catch (const IoError& e) {
    spdlog::error("I/O error: {}", e.what());
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("I/O error: {}", e.what());
    return kIo;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  }
}

}  // namespace noisectx::cli
