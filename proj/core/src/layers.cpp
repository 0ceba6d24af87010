#include "noisectx/layers.hpp"

#include "noisectx/ops.hpp"

namespace noisectx {
namespace {

template <typename T>
Var<T> half_residual(Var<T> x, Var<T> branch) {
  return add(x, scale(branch, T(0.5)));
}

template <typename T>
Var<T> final_norm(Graph<T>& g, const std::string& prefix, Var<T> x) {
  return layer_norm(x, g.param(prefix + ".ln_out.gain"), g.param(prefix + ".ln_out.bias"));
}

}  // namespace

void LayerConfig::validate() const {
  if (d == 0) throw ConfigError("model dimension must be positive");
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("model dimension " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (conv_kernel == 0) throw ConfigError("conv kernel must be >= 1");
}

ConformerLayer::ConformerLayer(std::string prefix, const LayerConfig& config)
    : prefix_(std::move(prefix)),
      d_(config.d),
      ffn1_(prefix_ + ".ffn1", config.d),
      conv_(prefix_ + ".conv", config.d, config.conv_kernel),
      mhsa_(prefix_ + ".mhsa", config.d, config.heads, AttentionMask{config.lookback, true}),
      ffn2_(prefix_ + ".ffn2", config.d) {
  config.validate();
}

void ConformerLayer::declare(ParameterLayout& layout) const {
  ffn1_.declare(layout);
  conv_.declare(layout);
  mhsa_.declare(layout);
  ffn2_.declare(layout);
  layout.add(prefix_ + ".ln_out.gain", {d_}, InitKind::Ones);
  layout.add(prefix_ + ".ln_out.bias", {d_}, InitKind::Zeros);
}

template <typename T>
Var<T> ConformerLayer::operator()(Graph<T>& g, Var<T> x) const {
  Var<T> x1 = half_residual(x, ffn1_(g, x));
  Var<T> x2 = add(x1, conv_(g, x1));
  Var<T> x3 = add(x2, mhsa_(g, x2));
  return final_norm(g, prefix_, half_residual(x3, ffn2_(g, x3)));
}

CrossAttentionConformerLayer::CrossAttentionConformerLayer(std::string prefix, const LayerConfig& config)
    : prefix_(std::move(prefix)),
      d_(config.d),
      variant_(config.variant),
      ffn1_(prefix_ + ".ffn1", config.d),
      ffn_context_(prefix_ + ".ffn_ctx", config.d),
      conv_(prefix_ + ".conv", config.d, config.conv_kernel),
      conv_context_(prefix_ + ".conv_ctx", config.d, config.conv_kernel),
      mhca1_(prefix_ + ".mhca1", config.d, config.heads),
      film_(prefix_ + ".film", config.d),
      mhca2_(prefix_ + ".mhca2", config.d, config.heads, AttentionMask{config.lookback, true}),
      ffn2_(prefix_ + ".ffn2", config.d) {
  config.validate();
}

void CrossAttentionConformerLayer::declare(ParameterLayout& layout) const {
  ffn1_.declare(layout);
  ffn_context_.declare(layout);
  conv_.declare(layout);
  conv_context_.declare(layout);
  mhca1_.declare(layout);
  film_.declare(layout);
  mhca2_.declare(layout);
  ffn2_.declare(layout);
  layout.add(prefix_ + ".ln_out.gain", {d_}, InitKind::Ones);
  layout.add(prefix_ + ".ln_out.bias", {d_}, InitKind::Zeros);
}

template <typename T>
Var<T> CrossAttentionConformerLayer::operator()(Graph<T>& g, Var<T> x, Var<T> context,
                                                CrossLayerTrace<T>* trace) const {
  Var<T> x_tilde = half_residual(x, ffn1_(g, x));
  Var<T> n_tilde = half_residual(context, ffn_context_(g, context));
  Var<T> x_prime = add(x_tilde, conv_(g, x_tilde));
  Var<T> n_prime = add(n_tilde, conv_context_(g, n_tilde));
  Var<T> x_second = add(x_prime, mhca1_(g, x_prime, n_prime));
  if (trace) {
    trace->x_prime = x_prime;
    trace->n_prime = n_prime;
    trace->x_second = x_second;
  }

  Var<T> merged = x_second;
  if (variant_ != CrossVariant::NoFilmNoSecondMhca) {
    Var<T> kv = x_second;
    if (variant_ == CrossVariant::Full) {
      kv = film_(g, x_prime, x_second);
      if (trace) trace->x_third = kv;
    }
    merged = add(x_prime, mhca2_(g, x_prime, kv));
    if (trace) trace->x_fourth = merged;
  }
  return final_norm(g, prefix_, half_residual(merged, ffn2_(g, merged)));
}

template Var<float> ConformerLayer::operator()(Graph<float>&, Var<float>) const;
template Var<double> ConformerLayer::operator()(Graph<double>&, Var<double>) const;
template Var<float> CrossAttentionConformerLayer::operator()(Graph<float>&, Var<float>, Var<float>,
                                                             CrossLayerTrace<float>*) const;
template Var<double> CrossAttentionConformerLayer::operator()(Graph<double>&, Var<double>, Var<double>,
                                                              CrossLayerTrace<double>*) const;

}  // namespace noisectx
