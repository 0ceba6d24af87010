#pragma once

#include <cstddef>
#include <vector>

#include "noisectx/graph.hpp"
#include "noisectx/tensor.hpp"

namespace noisectx {

/// Additive-mask entry that blocks a position in softmax_masked.
inline constexpr double kBlockedLogit = -1e30;

inline constexpr double kLayerNormEps = 1e-6;

// Every op records one node; operands of `...xD` shape are viewed as
// rows x D. Shape violations throw DimensionError naming both operands.

/// [M x K] . [K x N]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

/// [M x K] . [N x K]^T
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> sub(Var<T> a, Var<T> b);

/// Hadamard product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> a, T factor);

template <typename T>
Var<T> sigmoid(Var<T> x);

/// x * sigmoid(x)
template <typename T>
Var<T> swish(Var<T> x);

/// Splits the last axis in halves (a, b) and returns a * sigmoid(b).
template <typename T>
Var<T> glu(Var<T> x);

/// x . W + b with x [... x I], W [I x O], b [O].
template <typename T>
Var<T> affine(Var<T> x, Var<T> weight, Var<T> bias);

/// Per-row normalization to zero mean and unit variance (eps inside the
/// root), then per-channel gain and bias.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(kLayerNormEps));

/// Per-row normalization within `groups` contiguous channel groups.
/// groups == 1 coincides with layer_norm.
template <typename T>
Var<T> group_norm(Var<T> x, Var<T> gain, Var<T> bias, std::size_t groups, T eps = T(kLayerNormEps));

/// y[t,d] = sum_k kernel[k,d] * x[t-K+1+k, d], with x zero for negative time.
template <typename T>
Var<T> conv1d_depthwise_causal(Var<T> x, Var<T> kernel);

/// Row-wise softmax of logits + mask. Mask entries are 0 (allowed) or
/// kBlockedLogit (blocked); blocked outputs are exactly zero. An empty mask
/// allows everything.
template <typename T>
Var<T> softmax_masked(Var<T> logits, const Tensor<T>& mask);

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count);

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts);

/// FiLM(x, y) = (y . Wr + br) * x + (y . Wh + bh), applied per row.
template <typename T>
Var<T> film(Var<T> x, Var<T> y, Var<T> r_weight, Var<T> r_bias, Var<T> h_weight, Var<T> h_bias);

/// Sum of all elements, as a one-element tensor.
template <typename T>
Var<T> sum(Var<T> x);

/// sum over rows < valid_rows of |target - est| + (target - est)^2.
template <typename T>
Var<T> l1_l2_loss(Var<T> est, const Tensor<T>& target, std::size_t valid_rows);

/// Additive mask for query length `rows` and key length `cols`.
/// Row t allows columns s with s <= t (when causal) and t - s <= lookback
/// (when lookback >= 0).
template <typename T>
Tensor<T> make_attention_mask(std::size_t rows, std::size_t cols, bool causal, long lookback);

}  // namespace noisectx
