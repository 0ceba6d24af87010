#include "noisectx/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "noisectx/io.hpp"
#include "noisectx/ops.hpp"

namespace noisectx {
namespace {

TensorD load_power_dump(const std::filesystem::path& path, std::size_t frames, std::size_t channels) {
  const FeatureSequence seq = read_feature_dump(path);
  if (seq.frames.rows() != frames || seq.frames.cols() != channels) {
    throw IoError("'" + path.string() + "' holds " + shape_str(seq.frames.shape()) + ", expected [" +
                  std::to_string(frames) + " x " + std::to_string(channels) + "]");
  }
  return seq.frames;
}

std::int64_t total_valid_bins(const PaddedBatch& batch) {
  std::int64_t bins = 0;
  for (std::size_t i = 0; i < batch.noisy.size(); ++i) {
    bins += static_cast<std::int64_t>(batch.valid_frames[i] * batch.noisy[i].cols());
  }
  return bins;
}

ModelCheckpoint snapshot(const Frontend& model, const NamedTensors<float>& params, const AdamState<float>& state,
                         std::size_t epochs) {
  return ModelCheckpoint{model.config(), params, state, epochs};
}

}  // namespace

TrainingExample to_training_example(const MixtureExample& mixture, const FeatureExtractor& features,
                                    std::string id) {
  TrainingExample ex;
  ex.id = std::move(id);
  ex.noisy = features.log_mel(mixture.noisy_wave).frames;
  if (mixture.has_context()) ex.context = features.log_mel(mixture.context_wave).frames;
  ex.clean_mel = mixture.clean_mel;
  ex.noise_mel = mixture.noise_mel;
  ex.irm = mixture.irm;
  ex.snr_db = mixture.snr_db;
  return ex;
}

Dataset to_dataset(const std::vector<IdentityExample>& examples, const FeatureExtractor& features) {
  Dataset out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out.push_back(to_training_example(examples[i].mixture, features, "identity_" + std::to_string(i)));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& manifest, const FeatureExtractor& features) {
  Dataset out;
  for (const ManifestRecord& rec : read_manifest(manifest)) {
    TrainingExample ex;
    ex.id = rec.id;
    ex.snr_db = rec.snr_db;
    ex.noisy = features.log_mel(read_wav(rec.noisy_wav)).frames;
    if (rec.has_context()) ex.context = features.log_mel(read_wav(rec.context_wav)).frames;
    ex.clean_mel = load_power_dump(rec.clean_mel, ex.noisy.rows(), ex.noisy.cols());
    ex.noise_mel = load_power_dump(rec.noise_mel, ex.noisy.rows(), ex.noisy.cols());
    ex.irm = compute_irm({ex.clean_mel, ex.noise_mel});
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw IoError("manifest '" + manifest.string() + "' has no records");
  return out;
}

PaddedBatch pad_batch(std::span<const TrainingExample* const> batch, double pad_value) {
  if (batch.empty()) throw ContractError("pad_batch: empty batch");
  PaddedBatch out;
  for (const auto* ex : batch) out.max_frames = std::max(out.max_frames, ex->frames());
  for (const auto* ex : batch) {
    const std::size_t f = ex->noisy.cols();
    TensorF noisy({out.max_frames, f}, static_cast<float>(pad_value));
    TensorF target({out.max_frames, f});
    for (std::size_t i = 0; i < ex->noisy.size(); ++i) {
      noisy[i] = static_cast<float>(ex->noisy[i]);
      target[i] = static_cast<float>(ex->irm[i]);
    }
    out.noisy.push_back(std::move(noisy));
    out.target.push_back(std::move(target));
    out.valid_frames.push_back(ex->frames());
    out.context.push_back(ex->context ? std::optional<TensorF>(ex->context->cast<float>()) : std::nullopt);
  }
  return out;
}

BatchGradient batch_gradient(const Frontend& model, const NamedTensors<float>& params, const PaddedBatch& batch) {
  const bool wants_context = model.config().uses_context();
  BatchGradient out;
  out.grads = params.zeros_like();
  for (std::size_t i = 0; i < batch.noisy.size(); ++i) {
    Graph<float> g(&params);
    std::optional<Var<float>> ctx;
    if (wants_context) {
      if (!batch.context[i]) {
        throw ConfigError("variant " + std::string(to_string(model.config().variant)) +
                          " requires noise context but example " + std::to_string(i) + " has none");
      }
      ctx = g.constant(*batch.context[i]);
    }
    Var<float> est = model.forward(g, g.constant(batch.noisy[i]), ctx);
    Var<float> loss = l1_l2_loss(est, batch.target[i], batch.valid_frames[i]);
    out.loss += static_cast<double>(loss.value()[0]);
    NamedTensors<float> grads = g.backward(loss);
    for (auto& [name, acc] : out.grads) {
      const TensorF& gi = grads.at(name);
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += gi[k];
    }
  }
  out.loss /= static_cast<double>(total_valid_bins(batch));
  return out;
}

double train_step(const Frontend& model, NamedTensors<float>& params, AdamState<float>& state,
                  std::span<const TrainingExample* const> batch) {
  const double pad = std::log(FeatureConfig{}.mel_floor);
  BatchGradient bg = batch_gradient(model, params, pad_batch(batch, pad));
  if (!std::isfinite(bg.loss)) {
    throw NumericalError("training diverged: non-finite loss at step " + std::to_string(state.step + 1));
  }
  adam_step(params, bg.grads, state);
  return bg.loss;
}

TrainResult train(const Frontend& model, const Dataset& training, const Dataset& validation,
                  const TrainOptions& options) {
  NamedTensors<float> params = model.initialize<float>(options.seed);
  AdamState<float> state = AdamState<float>::fresh(params, options.adam);
  return train(model, ModelCheckpoint{model.config(), std::move(params), std::move(state), 0}, training, validation,
               options);
}

TrainResult train(const Frontend& model, ModelCheckpoint start, const Dataset& training, const Dataset& validation,
                  const TrainOptions& options) {
  if (training.empty()) throw ContractError("train: empty training set");
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");
  NamedTensors<float> params = std::move(start.params);
  AdamState<float> state = start.adam ? std::move(*start.adam) : AdamState<float>::fresh(params, options.adam);
  state.options = options.adam;
  const Dataset& val = validation.empty() ? training : validation;

  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

  TrainResult result;
  const std::size_t first = start.epochs_completed + 1;
  result.best_state = snapshot(model, params, state, start.epochs_completed);
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(training.size());
  for (std::size_t epoch = first; epoch < first + options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(options.seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const TrainingExample*> batch;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      for (std::size_t k = begin; k < end; ++k) batch.push_back(&training[order[k]]);
      loss_sum += train_step(model, params, state, batch);
      ++batches;
    }

    const EvalReport eval = eval_metrics(model, params, val);
    EpochRecord rec{epoch, state.step, loss_sum / static_cast<double>(batches), eval.overall.mean_loss,
                    eval.overall.snri_db};
    if (!std::isfinite(rec.val_loss)) {
      throw NumericalError("training diverged: non-finite validation loss after step " + std::to_string(state.step));
    }
    result.report.epochs.push_back(rec);

    const ModelCheckpoint current = snapshot(model, params, state, epoch);
    if (!options.checkpoint_dir.empty()) {
      to_archive(current).save(options.checkpoint_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"));
    }
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best_state = current;
      if (!options.checkpoint_dir.empty()) to_archive(current).save(options.checkpoint_dir / "best.ckpt");
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  result.final_state = snapshot(model, params, state, first - 1 + options.epochs);
  return result;
}

double snr_improvement_db(const TensorD& clean_mel, const TensorD& noise_mel, const TensorD& mask, double alpha,
                          double beta) {
  if (clean_mel.shape() != noise_mel.shape() || clean_mel.shape() != mask.shape()) {
    throw DimensionError("snr_improvement_db: shapes " + shape_str(clean_mel.shape()) + ", " +
                         shape_str(noise_mel.shape()) + ", " + shape_str(mask.shape()));
  }
  double x = 0.0, n = 0.0, gx = 0.0, gn = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double g = mask_gain(mask[i], alpha, beta);
    x += clean_mel[i];
    n += noise_mel[i];
    gx += g * clean_mel[i];
    gn += g * noise_mel[i];
  }
  if (x <= 0.0 || n <= 0.0) throw ContractError("snr_improvement_db: silent speech or noise reference");
  return 10.0 * std::log10(gx / gn) - 10.0 * std::log10(x / n);
}

EvalReport evaluate_masks(const Dataset& dataset, const MaskFn& mask, double alpha, double beta) {
  EvalReport report;
  struct Sums {
    double loss = 0.0;
    double bins = 0.0;
    double snri = 0.0;
    std::size_t n = 0;
  };
  Sums all;
  std::map<double, Sums> per;
  for (const TrainingExample& ex : dataset) {
    const TensorD m = mask(ex);
    const double loss = irm_loss(ex.irm, m);
    const double snri = snr_improvement_db(ex.clean_mel, ex.noise_mel, m, alpha, beta);
    for (Sums* s : {&all, &per[ex.snr_db]}) {
      s->loss += loss;
      s->bins += static_cast<double>(m.size());
      s->snri += snri;
      ++s->n;
    }
  }
  auto finish = [](const Sums& s) {
    ConditionMetrics c;
    c.examples = s.n;
    if (s.n > 0) {
      c.mean_loss = s.loss / s.bins;
      c.snri_db = s.snri / static_cast<double>(s.n);
    }
    return c;
  };
  report.overall = finish(all);
  for (const auto& [snr, s] : per) report.by_snr[snr] = finish(s);
  return report;
}

TensorD estimate_mask(const Frontend& model, const NamedTensors<float>& params, const TrainingExample& example) {
  const TensorF noisy = example.noisy.cast<float>();
  std::optional<TensorF> ctx;
  if (model.config().uses_context()) {
    if (!example.context) throw ConfigError("example '" + example.id + "' has no noise context");
    ctx = example.context->cast<float>();
  }
  return model.infer<float>(params, noisy, ctx ? &*ctx : nullptr).cast<double>();
}

EvalReport eval_metrics(const Frontend& model, const NamedTensors<float>& params, const Dataset& dataset) {
  return evaluate_masks(
      dataset, [&](const TrainingExample& ex) { return estimate_mask(model, params, ex); }, model.config().alpha,
      model.config().beta);
}

}  // namespace noisectx
