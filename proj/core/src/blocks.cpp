#include "noisectx/blocks.hpp"

#include <cmath>

#include "noisectx/ops.hpp"

namespace noisectx {
namespace {

void require_heads(std::size_t d, std::size_t heads) {
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("model dimension " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
}

void declare_norm(ParameterLayout& layout, const std::string& prefix, std::size_t d) {
  layout.add(prefix + ".gain", {d}, InitKind::Ones);
  layout.add(prefix + ".bias", {d}, InitKind::Zeros);
}

void declare_affine(ParameterLayout& layout, const std::string& prefix, std::size_t in, std::size_t out) {
  layout.add(prefix + ".w", {in, out}, InitKind::Glorot);
  layout.add(prefix + ".b", {out}, InitKind::Zeros);
}

template <typename T>
Var<T> norm(Graph<T>& g, const std::string& prefix, Var<T> x) {
  return layer_norm(x, g.param(prefix + ".gain"), g.param(prefix + ".bias"));
}

template <typename T>
Var<T> dense(Graph<T>& g, const std::string& prefix, Var<T> x) {
  return affine(x, g.param(prefix + ".w"), g.param(prefix + ".b"));
}

// Keys carry no bias: it would shift every logit of a row equally and never
// affect the output.
void declare_attention_projections(ParameterLayout& layout, const std::string& prefix, std::size_t d) {
  declare_affine(layout, prefix + ".q", d, d);
  layout.add(prefix + ".k.w", {d, d}, InitKind::Glorot);
  declare_affine(layout, prefix + ".v", d, d);
  declare_affine(layout, prefix + ".out", d, d);
}

void require_width(const char* block, const Shape& shape, std::size_t d) {
  if (shape.size() != 2 || shape[1] != d) {
    throw DimensionError(std::string(block) + ": expected [T x " + std::to_string(d) + "], got " + shape_str(shape));
  }
}

}  // namespace

template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads, const Tensor<T>& mask,
                            AttentionTrace<T>* trace) {
  const std::size_t d = q.value().cols();
  require_heads(d, heads);
  if (k.shape() != v.shape() || k.value().cols() != d) {
    throw DimensionError("attention: query " + shape_str(q.shape()) + " vs key " + shape_str(k.shape()) +
                         " / value " + shape_str(v.shape()));
  }
  const std::size_t head_dim = d / heads;
  const T inv_scale = T{1} / std::sqrt(static_cast<T>(head_dim));
  std::vector<Var<T>> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var<T> qh = slice_cols(q, h * head_dim, head_dim);
    Var<T> kh = slice_cols(k, h * head_dim, head_dim);
    Var<T> vh = slice_cols(v, h * head_dim, head_dim);
    Var<T> weights = softmax_masked(scale(matmul_nt(qh, kh), inv_scale), mask);
    if (trace) trace->weights.push_back(weights.value());
    outputs.push_back(matmul(weights, vh));
  }
  return heads == 1 ? outputs.front() : concat_cols(outputs);
}

FeedForward::FeedForward(std::string prefix, std::size_t d, std::size_t expansion)
    : prefix_(std::move(prefix)), d_(d), hidden_(d * expansion) {}

void FeedForward::declare(ParameterLayout& layout) const {
  declare_norm(layout, prefix_ + ".ln", d_);
  declare_affine(layout, prefix_ + ".fc1", d_, hidden_);
  declare_affine(layout, prefix_ + ".fc2", hidden_, d_);
}

template <typename T>
Var<T> FeedForward::operator()(Graph<T>& g, Var<T> x) const {
  require_width("ffn", x.shape(), d_);
  Var<T> h = norm(g, prefix_ + ".ln", x);
  h = swish(dense(g, prefix_ + ".fc1", h));
  return dense(g, prefix_ + ".fc2", h);
}

ConvModule::ConvModule(std::string prefix, std::size_t d, std::size_t kernel)
    : prefix_(std::move(prefix)), d_(d), kernel_(kernel) {
  if (kernel_ == 0) throw ConfigError("conv kernel must be >= 1");
}

void ConvModule::declare(ParameterLayout& layout) const {
  declare_norm(layout, prefix_ + ".ln", d_);
  declare_affine(layout, prefix_ + ".pw1", d_, 2 * d_);
  layout.add(prefix_ + ".dw.kernel", {kernel_, d_}, InitKind::Glorot);
  declare_norm(layout, prefix_ + ".gn", d_);
  declare_affine(layout, prefix_ + ".pw2", d_, d_);
}

template <typename T>
Var<T> ConvModule::operator()(Graph<T>& g, Var<T> x) const {
  require_width("conv_module", x.shape(), d_);
  Var<T> h = norm(g, prefix_ + ".ln", x);
  h = glu(dense(g, prefix_ + ".pw1", h));
  h = conv1d_depthwise_causal(h, g.param(prefix_ + ".dw.kernel"));
  h = group_norm(h, g.param(prefix_ + ".gn.gain"), g.param(prefix_ + ".gn.bias"), 1);
  h = swish(h);
  return dense(g, prefix_ + ".pw2", h);
}

SelfAttention::SelfAttention(std::string prefix, std::size_t d, std::size_t heads, AttentionMask mask)
    : prefix_(std::move(prefix)), d_(d), heads_(heads), mask_(mask) {
  require_heads(d_, heads_);
}

void SelfAttention::declare(ParameterLayout& layout) const {
  declare_norm(layout, prefix_ + ".ln", d_);
  declare_attention_projections(layout, prefix_, d_);
}

template <typename T>
Var<T> SelfAttention::operator()(Graph<T>& g, Var<T> x, AttentionTrace<T>* trace) const {
  require_width("mhsa", x.shape(), d_);
  const std::size_t steps = x.shape()[0];
  Var<T> h = norm(g, prefix_ + ".ln", x);
  Var<T> q = dense(g, prefix_ + ".q", h);
  Var<T> k = matmul(h, g.param(prefix_ + ".k.w"));
  Var<T> v = dense(g, prefix_ + ".v", h);
  const Tensor<T> mask = make_attention_mask<T>(steps, steps, mask_.causal, mask_.lookback);
  return dense(g, prefix_ + ".out", multi_head_attention(q, k, v, heads_, mask, trace));
}

CrossAttention::CrossAttention(std::string prefix, std::size_t d, std::size_t heads,
                               std::optional<AttentionMask> mask)
    : prefix_(std::move(prefix)), d_(d), heads_(heads), mask_(mask) {
  require_heads(d_, heads_);
}

void CrossAttention::declare(ParameterLayout& layout) const {
  declare_norm(layout, prefix_ + ".ln_q", d_);
  declare_norm(layout, prefix_ + ".ln_kv", d_);
  declare_attention_projections(layout, prefix_, d_);
}

template <typename T>
Var<T> CrossAttention::operator()(Graph<T>& g, Var<T> q_src, Var<T> kv_src, AttentionTrace<T>* trace) const {
  require_width("mhca query", q_src.shape(), d_);
  require_width("mhca context", kv_src.shape(), d_);
  Var<T> hq = norm(g, prefix_ + ".ln_q", q_src);
  Var<T> hkv = norm(g, prefix_ + ".ln_kv", kv_src);
  Var<T> q = dense(g, prefix_ + ".q", hq);
  Var<T> k = matmul(hkv, g.param(prefix_ + ".k.w"));
  Var<T> v = dense(g, prefix_ + ".v", hkv);
  Tensor<T> mask;
  if (mask_) {
    if (q_src.shape()[0] != kv_src.shape()[0]) {
      throw DimensionError("masked mhca: " + shape_str(q_src.shape()) + " queries against " +
                           shape_str(kv_src.shape()) + " keys");
    }
    mask = make_attention_mask<T>(q_src.shape()[0], kv_src.shape()[0], mask_->causal, mask_->lookback);
  }
  return dense(g, prefix_ + ".out", multi_head_attention(q, k, v, heads_, mask, trace));
}

Film::Film(std::string prefix, std::size_t d) : prefix_(std::move(prefix)), d_(d) {}

void Film::declare(ParameterLayout& layout) const {
  declare_affine(layout, prefix_ + ".r", d_, d_);
  declare_affine(layout, prefix_ + ".h", d_, d_);
}

template <typename T>
Var<T> Film::operator()(Graph<T>& g, Var<T> x, Var<T> y) const {
  require_width("film", x.shape(), d_);
  return film(x, y, g.param(prefix_ + ".r.w"), g.param(prefix_ + ".r.b"), g.param(prefix_ + ".h.w"),
              g.param(prefix_ + ".h.b"));
}

#define NOISECTX_INSTANTIATE_BLOCKS(T)                                                                    \
  template Var<T> multi_head_attention(Var<T>, Var<T>, Var<T>, std::size_t, const Tensor<T>&,            \
                                       AttentionTrace<T>*);                                               \
  template Var<T> FeedForward::operator()(Graph<T>&, Var<T>) const;                                       \
  template Var<T> ConvModule::operator()(Graph<T>&, Var<T>) const;                                        \
  template Var<T> SelfAttention::operator()(Graph<T>&, Var<T>, AttentionTrace<T>*) const;                 \
  template Var<T> CrossAttention::operator()(Graph<T>&, Var<T>, Var<T>, AttentionTrace<T>*) const;        \
  template Var<T> Film::operator()(Graph<T>&, Var<T>, Var<T>) const;

NOISECTX_INSTANTIATE_BLOCKS(float)
NOISECTX_INSTANTIATE_BLOCKS(double)

#undef NOISECTX_INSTANTIATE_BLOCKS

}  // namespace noisectx
