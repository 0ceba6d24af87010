#pragma once

#include <cstddef>
#include <string>

#include "noisectx/blocks.hpp"

namespace noisectx {

/// Ablations of the cross-attention conformer layer.
enum class CrossVariant {
  Full,                // both cross-attentions and FiLM (E3)
  NoFilm,              // FiLM removed (E2)
  NoFilmNoSecondMhca,  // FiLM and second cross-attention removed (E1)
};

struct LayerConfig {
  std::size_t d = 256;
  std::size_t heads = 8;
  std::size_t conv_kernel = 15;
  long lookback = 64;
  CrossVariant variant = CrossVariant::Full;

  void validate() const;
};

/// x~ = x + FFN(x)/2; x' = x~ + Conv(x~); x'' = x' + MHSA(x');
/// y = LayerNorm(x'' + FFN2(x'')/2).
class ConformerLayer {
 public:
  ConformerLayer(std::string prefix, const LayerConfig& config);
  void declare(ParameterLayout& layout) const;
  template <typename T>
  Var<T> operator()(Graph<T>& g, Var<T> x) const;

 private:
  std::string prefix_;
  std::size_t d_;
  FeedForward ffn1_;
  ConvModule conv_;
  SelfAttention mhsa_;
  FeedForward ffn2_;
};

/// Intermediate tensors of one cross-attention conformer forward pass.
template <typename T>
struct CrossLayerTrace {
  Var<T> x_prime;    // x~ + Conv(x~)
  Var<T> n_prime;    // n~ + Conv_n(n~)
  Var<T> x_second;   // x' + MHCA1(x', n')
  Var<T> x_third;    // FiLM output (Full only)
  Var<T> x_fourth;   // x' + MHCA2(x', kv) (Full and NoFilm)
};

/// Cross-attention conformer layer. Every variant declares the same
/// parameters; ablated blocks are simply never evaluated, so their
/// gradients stay exactly zero.
///
///   x~ = x + FFN(x)/2,        n~ = n + FFN_n(n)/2
///   x' = x~ + Conv(x~),       n' = n~ + Conv_n(n~)
///   x'' = x' + MHCA1(x', n')
///   x''' = x' * r(x'') + h(x'')                     (Full)
///   x'''' = x' + MHCA2(x', x''')  or  MHCA2(x', x'') (NoFilm)
///   y = LayerNorm(z + FFN2(z)/2), z = x'''' (or x'' for NoFilmNoSecondMhca)
class CrossAttentionConformerLayer {
 public:
  CrossAttentionConformerLayer(std::string prefix, const LayerConfig& config);
  void declare(ParameterLayout& layout) const;
  template <typename T>
  Var<T> operator()(Graph<T>& g, Var<T> x, Var<T> context, CrossLayerTrace<T>* trace = nullptr) const;

  CrossVariant variant() const noexcept { return variant_; }
  const CrossAttention& first_attention() const noexcept { return mhca1_; }
  const CrossAttention& second_attention() const noexcept { return mhca2_; }
  const Film& merge() const noexcept { return film_; }

 private:
  std::string prefix_;
  std::size_t d_;
  CrossVariant variant_;
  FeedForward ffn1_;
  FeedForward ffn_context_;
  ConvModule conv_;
  ConvModule conv_context_;
  CrossAttention mhca1_;
  Film film_;
  CrossAttention mhca2_;
  FeedForward ffn2_;
};

}  // namespace noisectx
