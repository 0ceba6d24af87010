#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisectx/adam.hpp"
#include "noisectx/checkpoint.hpp"
#include "noisectx/datagen.hpp"
#include "noisectx/frontend.hpp"

namespace noisectx {

/// Model-ready example: log-Mel inputs plus Mel-power references.
struct TrainingExample {
  std::string id;
  TensorD noisy;                   // log-Mel [T x F]
  std::optional<TensorD> context;  // log-Mel [S x F]
  TensorD clean_mel;               // Mel power [T x F]
  TensorD noise_mel;               // Mel power [T x F]
  TensorD irm;                     // [T x F]
  double snr_db = 0.0;

  std::size_t frames() const { return noisy.rows(); }
};

using Dataset = std::vector<TrainingExample>;

TrainingExample to_training_example(const MixtureExample& mixture, const FeatureExtractor& features,
                                    std::string id);
Dataset to_dataset(const std::vector<IdentityExample>& examples, const FeatureExtractor& features);

/// Reads every manifest record (WAVs and Mel-power dumps). Fails with
/// IoError naming the offending path.
Dataset load_dataset(const std::filesystem::path& manifest, const FeatureExtractor& features);

/// Noisy inputs and IRM targets of a batch, padded to the longest example.
/// Padding frames repeat the feature floor and are excluded from the loss
/// through `valid_frames`.
struct PaddedBatch {
  std::vector<TensorF> noisy;
  std::vector<std::optional<TensorF>> context;
  std::vector<TensorF> target;
  std::vector<std::size_t> valid_frames;
  std::size_t max_frames = 0;
};

PaddedBatch pad_batch(std::span<const TrainingExample* const> batch, double pad_value);

struct BatchGradient {
  double loss = 0.0;  // mean over valid (frame, channel) bins
  NamedTensors<float> grads;
};

/// Gradient of the summed training loss over the batch's valid bins. The
/// reported `loss` is that sum divided by the valid bin count.
BatchGradient batch_gradient(const Frontend& model, const NamedTensors<float>& params, const PaddedBatch& batch);

/// One Adam update on `batch`; returns the batch loss before the update.
double train_step(const Frontend& model, NamedTensors<float>& params, AdamState<float>& state,
                  std::span<const TrainingExample* const> batch);

struct EpochRecord {
  std::size_t epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
  double val_loss = 0.0;
  double val_snri_db = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  AdamOptions adam;
  /// epoch_<n>.ckpt after each epoch and best.ckpt (lowest validation loss)
  /// are written here when set.
  std::filesystem::path checkpoint_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  TrainReport report;
  ModelCheckpoint final_state;
  ModelCheckpoint best_state;
};

/// Deterministic given options.seed: it fixes the initialization and every
/// epoch's shuffle. An empty validation set evaluates on the training set.
/// A non-finite loss aborts with NumericalError naming the step.
TrainResult train(const Frontend& model, const Dataset& training, const Dataset& validation,
                  const TrainOptions& options);

/// Continues from an existing state (parameters, optimizer and epoch count).
TrainResult train(const Frontend& model, ModelCheckpoint start, const Dataset& training, const Dataset& validation,
                  const TrainOptions& options);

/// Mel-power SNR gain of a mask, with the inference gain g = max(mask, beta)^alpha
/// applied to both references:
///   10 log10(sum g X / sum g N) - 10 log10(sum X / sum N).
double snr_improvement_db(const TensorD& clean_mel, const TensorD& noise_mel, const TensorD& mask, double alpha,
                          double beta);

struct ConditionMetrics {
  std::size_t examples = 0;
  double mean_loss = 0.0;  // per bin
  double snri_db = 0.0;    // mean over examples
};

struct EvalReport {
  ConditionMetrics overall;
  std::map<double, ConditionMetrics> by_snr;
};

using MaskFn = std::function<TensorD(const TrainingExample&)>;

EvalReport evaluate_masks(const Dataset& dataset, const MaskFn& mask, double alpha, double beta);

/// Metrics of the model's estimated masks.
EvalReport eval_metrics(const Frontend& model, const NamedTensors<float>& params, const Dataset& dataset);

/// Model mask estimate for one example, in double precision.
TensorD estimate_mask(const Frontend& model, const NamedTensors<float>& params, const TrainingExample& example);

}  // namespace noisectx
