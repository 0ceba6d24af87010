#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noisectx/config.hpp"
#include "noisectx/features.hpp"
#include "noisectx/layers.hpp"

namespace noisectx {

/// E0: no noise context. E1-E3: cross-attention ablations (see CrossVariant).
enum class Variant { E0, E1, E2, E3 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

struct FrontendConfig {
  Variant variant = Variant::E3;
  std::size_t d = 256;
  /// Conformer layers over the noisy input; for E0 the whole encoder.
  std::size_t speech_layers = 2;
  std::size_t noise_layers = 2;
  std::size_t cross_layers = 2;
  std::size_t heads = 8;
  std::size_t conv_kernel = 15;
  long lookback = 64;
  std::size_t feature_dim = 128;
  /// Inference mask exponent and floor.
  double alpha = 0.5;
  double beta = 0.01;

  /// 4 conformer layers at d = 512.
  static FrontendConfig baseline();
  /// 2 speech + 2 noise conformer layers and 2 cross-attention layers at d = 256.
  static FrontendConfig context_model(Variant variant);
  static FrontendConfig for_variant(Variant variant);

  bool uses_context() const noexcept { return variant != Variant::E0; }
  LayerConfig layer_config() const;
  void validate() const;

  /// Round-trips through the key=value format used by checkpoints and the CLI.
  KeyValueConfig to_config() const;
  /// Fields absent from `cfg` keep the defaults of `base`.
  static FrontendConfig from_config(const KeyValueConfig& cfg, const FrontendConfig& base);
};

/// Input projection, encoders, cross-attention stack and sigmoid mask head.
class Frontend {
 public:
  explicit Frontend(FrontendConfig config);

  const FrontendConfig& config() const noexcept { return config_; }
  const ParameterLayout& layout() const noexcept { return layout_; }

  template <typename T>
  NamedTensors<T> initialize(std::uint64_t seed) const;

  /// noisy [T x feature_dim] log-Mel -> mask estimate [T x feature_dim] in
  /// (0, 1). E0 never reads `context`; E1-E3 require it.
  template <typename T>
  Var<T> forward(Graph<T>& g, Var<T> noisy, std::optional<Var<T>> context) const;

  /// Forward through a private graph.
  template <typename T>
  Tensor<T> infer(const NamedTensors<T>& params, const Tensor<T>& noisy, const Tensor<T>* context) const;

 private:
  FrontendConfig config_;
  std::vector<ConformerLayer> speech_encoder_;
  std::vector<ConformerLayer> noise_encoder_;
  std::vector<CrossAttentionConformerLayer> cross_layers_;
  ParameterLayout layout_;
};

std::size_t count_parameters(const FrontendConfig& config);

/// Reverberant-speech and noise Mel power, both [T x C].
struct SpectrogramPair {
  TensorD speech;
  TensorD noise;
};

/// Power below which X + N counts as silence and the target is 0.5.
inline constexpr double kSilenceFloor = 1e-8;

/// X / (X + N), or 0.5 where X + N < kSilenceFloor.
TensorD compute_irm(const SpectrogramPair& pair);

/// sum over (t, c) of |irm - est| + (irm - est)^2.
double irm_loss(const TensorD& irm, const TensorD& est);

/// Mask factor applied to power at inference: max(est, beta)^alpha.
double mask_gain(double est, double alpha, double beta);

/// log(noisy_mel * max(est, beta)^alpha), floored like log_compress.
FeatureSequence apply_mask(const TensorD& noisy_mel, const TensorD& est, double alpha, double beta,
                           const FeatureConfig& features);

}  // namespace noisectx
