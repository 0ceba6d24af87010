#include "noisectx/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "noisectx/ops.hpp"

namespace noisectx {
namespace {

CrossVariant cross_variant(Variant v) {
  switch (v) {
    case Variant::E1:
      return CrossVariant::NoFilmNoSecondMhca;
    case Variant::E2:
      return CrossVariant::NoFilm;
    default:
      return CrossVariant::Full;
  }
}

void declare_dense(ParameterLayout& layout, const std::string& prefix, std::size_t in, std::size_t out) {
  layout.add(prefix + ".w", {in, out}, InitKind::Glorot);
  layout.add(prefix + ".b", {out}, InitKind::Zeros);
}

void require_same_shape(const char* what, const TensorD& a, const TensorD& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::E0:
      return "E0";
    case Variant::E1:
      return "E1";
    case Variant::E2:
      return "E2";
    case Variant::E3:
      return "E3";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "E0" || text == "e0") return Variant::E0;
  if (text == "E1" || text == "e1") return Variant::E1;
  if (text == "E2" || text == "e2") return Variant::E2;
  if (text == "E3" || text == "e3") return Variant::E3;
  throw ConfigError("unknown variant '" + std::string(text) + "' (expected E0, E1, E2 or E3)");
}

FrontendConfig FrontendConfig::baseline() {
  FrontendConfig c;
  c.variant = Variant::E0;
  c.d = 512;
  c.speech_layers = 4;
  c.noise_layers = 0;
  c.cross_layers = 0;
  return c;
}

FrontendConfig FrontendConfig::context_model(Variant variant) {
  if (variant == Variant::E0) throw ConfigError("E0 has no context model");
  FrontendConfig c;
  c.variant = variant;
  return c;
}

FrontendConfig FrontendConfig::for_variant(Variant variant) {
  return variant == Variant::E0 ? baseline() : context_model(variant);
}

LayerConfig FrontendConfig::layer_config() const {
  return LayerConfig{d, heads, conv_kernel, lookback, cross_variant(variant)};
}

void FrontendConfig::validate() const {
  layer_config().validate();
  if (feature_dim != FeatureConfig{}.num_mels) {
    throw ConfigError("feature_dim must equal the " + std::to_string(FeatureConfig{}.num_mels) + " Mel channels");
  }
  if (speech_layers == 0 && variant == Variant::E0) throw ConfigError("E0 needs at least one conformer layer");
  if (uses_context() && cross_layers == 0) throw ConfigError("context variants need at least one cross layer");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
}

KeyValueConfig FrontendConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set("variant", std::string(to_string(variant)));
  cfg.set("d", std::to_string(d));
  cfg.set("speech_layers", std::to_string(speech_layers));
  cfg.set("noise_layers", std::to_string(noise_layers));
  cfg.set("cross_layers", std::to_string(cross_layers));
  cfg.set("heads", std::to_string(heads));
  cfg.set("kernel", std::to_string(conv_kernel));
  cfg.set("lookback", std::to_string(lookback));
  cfg.set("feature_dim", std::to_string(feature_dim));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", alpha);
  cfg.set("alpha", buf);
  std::snprintf(buf, sizeof buf, "%.17g", beta);
  cfg.set("beta", buf);
  return cfg;
}

FrontendConfig FrontendConfig::from_config(const KeyValueConfig& cfg, const FrontendConfig& base) {
  FrontendConfig c = base;
  if (auto v = cfg.get("variant")) c.variant = parse_variant(*v);
  c.d = cfg.get_size("d", c.d);
  c.speech_layers = cfg.get_size("speech_layers", c.speech_layers);
  c.noise_layers = cfg.get_size("noise_layers", c.noise_layers);
  c.cross_layers = cfg.get_size("cross_layers", c.cross_layers);
  c.heads = cfg.get_size("heads", c.heads);
  c.conv_kernel = cfg.get_size("kernel", c.conv_kernel);
  c.lookback = cfg.get_int("lookback", c.lookback);
  c.feature_dim = cfg.get_size("feature_dim", c.feature_dim);
  c.alpha = cfg.get_double("alpha", c.alpha);
  c.beta = cfg.get_double("beta", c.beta);
  return c;
}

Frontend::Frontend(FrontendConfig config) : config_(config) {
  config_.validate();
  const LayerConfig layer = config_.layer_config();
  for (std::size_t i = 0; i < config_.speech_layers; ++i) {
    speech_encoder_.emplace_back("speech_enc." + std::to_string(i), layer);
  }
  if (config_.uses_context()) {
    for (std::size_t i = 0; i < config_.noise_layers; ++i) {
      noise_encoder_.emplace_back("noise_enc." + std::to_string(i), layer);
    }
    for (std::size_t i = 0; i < config_.cross_layers; ++i) {
      cross_layers_.emplace_back("cross." + std::to_string(i), layer);
    }
  }

  declare_dense(layout_, "input_proj", config_.feature_dim, config_.d);
  if (config_.uses_context()) declare_dense(layout_, "context_proj", config_.feature_dim, config_.d);
  for (const auto& l : speech_encoder_) l.declare(layout_);
  for (const auto& l : noise_encoder_) l.declare(layout_);
  for (const auto& l : cross_layers_) l.declare(layout_);
  declare_dense(layout_, "mask_head", config_.d, config_.feature_dim);
}

template <typename T>
NamedTensors<T> Frontend::initialize(std::uint64_t seed) const {
  return noisectx::initialize<T>(layout_, seed);
}

template <typename T>
Var<T> Frontend::forward(Graph<T>& g, Var<T> noisy, std::optional<Var<T>> context) const {
  if (noisy.shape().size() != 2 || noisy.shape()[1] != config_.feature_dim) {
    throw DimensionError("frontend input must be [T x " + std::to_string(config_.feature_dim) + "], got " +
                         shape_str(noisy.shape()));
  }
  Var<T> x = affine(noisy, g.param("input_proj.w"), g.param("input_proj.b"));
  for (const auto& l : speech_encoder_) x = l(g, x);

  if (config_.uses_context()) {
    if (!context) {
      throw ConfigError("variant " + std::string(to_string(config_.variant)) + " requires noise context");
    }
    if (context->shape().size() != 2 || context->shape()[1] != config_.feature_dim) {
      throw DimensionError("context must be [S x " + std::to_string(config_.feature_dim) + "], got " +
                           shape_str(context->shape()));
    }
    Var<T> n = affine(*context, g.param("context_proj.w"), g.param("context_proj.b"));
    for (const auto& l : noise_encoder_) n = l(g, n);
    for (const auto& l : cross_layers_) x = l(g, x, n);
  }
  return sigmoid(affine(x, g.param("mask_head.w"), g.param("mask_head.b")));
}

template <typename T>
Tensor<T> Frontend::infer(const NamedTensors<T>& params, const Tensor<T>& noisy, const Tensor<T>* context) const {
  Graph<T> g(&params);
  std::optional<Var<T>> ctx;
  if (context != nullptr && config_.uses_context()) ctx = g.constant(*context);
  return forward(g, g.constant(noisy), ctx).value();
}

template NamedTensors<float> Frontend::initialize(std::uint64_t) const;
template NamedTensors<double> Frontend::initialize(std::uint64_t) const;
template Var<float> Frontend::forward(Graph<float>&, Var<float>, std::optional<Var<float>>) const;
template Var<double> Frontend::forward(Graph<double>&, Var<double>, std::optional<Var<double>>) const;
template Tensor<float> Frontend::infer(const NamedTensors<float>&, const Tensor<float>&, const Tensor<float>*) const;
template Tensor<double> Frontend::infer(const NamedTensors<double>&, const Tensor<double>&,
                                        const Tensor<double>*) const;

std::size_t count_parameters(const FrontendConfig& config) { return Frontend(config).layout().scalar_count(); }

TensorD compute_irm(const SpectrogramPair& pair) {
  require_same_shape("compute_irm", pair.speech, pair.noise);
  TensorD irm(pair.speech.shape());
  for (std::size_t i = 0; i < irm.size(); ++i) {
    const double x = pair.speech[i];
    const double n = pair.noise[i];
    if (x < 0.0 || n < 0.0) throw ContractError("compute_irm: negative Mel power");
    const double total = x + n;
    irm[i] = total < kSilenceFloor ? 0.5 : x / total;
  }
  return irm;
}

double irm_loss(const TensorD& irm, const TensorD& est) {
  require_same_shape("irm_loss", irm, est);
  double total = 0.0;
  for (std::size_t i = 0; i < irm.size(); ++i) {
    const double diff = irm[i] - est[i];
    total += std::abs(diff) + diff * diff;
  }
  return total;
}

double mask_gain(double est, double alpha, double beta) { return std::pow(std::max(est, beta), alpha); }

FeatureSequence apply_mask(const TensorD& noisy_mel, const TensorD& est, double alpha, double beta,
                           const FeatureConfig& features) {
  require_same_shape("apply_mask", noisy_mel, est);
  TensorD enhanced(noisy_mel.shape());
  for (std::size_t i = 0; i < enhanced.size(); ++i) {
    if (noisy_mel[i] < 0.0) throw ContractError("apply_mask: negative Mel power");
    enhanced[i] = noisy_mel[i] * mask_gain(est[i], alpha, beta);
  }
  return log_compress(enhanced, features);
}

}  // namespace noisectx
