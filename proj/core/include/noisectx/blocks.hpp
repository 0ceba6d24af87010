#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "noisectx/graph.hpp"
#include "noisectx/parameters.hpp"

namespace noisectx {

/// Which past frames a self-attention query may see. lookback < 0 means
/// unlimited; causal blocks all future frames.
struct AttentionMask {
  long lookback = 64;
  bool causal = true;
};

/// Per-head attention weights captured during a forward pass.
template <typename T>
struct AttentionTrace {
  std::vector<Tensor<T>> weights;
};

/// Scaled dot-product attention over `heads` column groups of q, k, v.
/// q [T x d], k and v [S x d]; mask [T x S] or empty for full attention.
template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads, const Tensor<T>& mask,
                            AttentionTrace<T>* trace = nullptr);

/// layer_norm -> affine d->4d -> swish -> affine 4d->d. The half-step
/// residual scaling belongs to the caller.
class FeedForward {
 public:
  FeedForward(std::string prefix, std::size_t d, std::size_t expansion = 4);
  void declare(ParameterLayout& layout) const;
  template <typename T>
  Var<T> operator()(Graph<T>& g, Var<T> x) const;

 private:
  std::string prefix_;
  std::size_t d_;
  std::size_t hidden_;
};

/// layer_norm -> pointwise d->2d -> GLU -> causal depthwise conv ->
/// group_norm (one group) -> swish -> pointwise d->d.
class ConvModule {
 public:
  ConvModule(std::string prefix, std::size_t d, std::size_t kernel);
  void declare(ParameterLayout& layout) const;
  template <typename T>
  Var<T> operator()(Graph<T>& g, Var<T> x) const;

 private:
  std::string prefix_;
  std::size_t d_;
  std::size_t kernel_;
};

/// Masked multi-headed self-attention with no positional embedding.
class SelfAttention {
 public:
  SelfAttention(std::string prefix, std::size_t d, std::size_t heads, AttentionMask mask);
  void declare(ParameterLayout& layout) const;
  template <typename T>
  Var<T> operator()(Graph<T>& g, Var<T> x, AttentionTrace<T>* trace = nullptr) const;

 private:
  std::string prefix_;
  std::size_t d_;
  std::size_t heads_;
  AttentionMask mask_;
};

/// Multi-headed cross-attention: queries from q_src, keys and values from
/// kv_src. Each source gets its own layer norm. Unmasked over all kv frames
/// unless a mask is given, in which case kv_src must be frame-aligned with
/// q_src.
class CrossAttention {
 public:
  CrossAttention(std::string prefix, std::size_t d, std::size_t heads, std::optional<AttentionMask> mask = {});
  void declare(ParameterLayout& layout) const;
  template <typename T>
  Var<T> operator()(Graph<T>& g, Var<T> q_src, Var<T> kv_src, AttentionTrace<T>* trace = nullptr) const;

  const std::string& prefix() const noexcept { return prefix_; }

 private:
  std::string prefix_;
  std::size_t d_;
  std::size_t heads_;
  std::optional<AttentionMask> mask_;
};

/// FiLM(x, y) = r(y) * x + h(y) with independent affine maps r and h.
class Film {
 public:
  Film(std::string prefix, std::size_t d);
  void declare(ParameterLayout& layout) const;
  template <typename T>
  Var<T> operator()(Graph<T>& g, Var<T> x, Var<T> y) const;

  const std::string& prefix() const noexcept { return prefix_; }

 private:
  std::string prefix_;
  std::size_t d_;
};

}  // namespace noisectx
