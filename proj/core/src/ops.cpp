#include "noisectx/ops.hpp"

#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

namespace noisectx {
namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_matrix(const char* op, const Shape& s) {
  if (s.size() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(s));
}

template <typename T>
using Wide = std::conditional_t<std::is_same_v<T, double>, long double, T>;

// C[M x N] += A[M x K] . B[K x N]
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  std::vector<Wide<T>> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) acc[j] = crow[j];
    for (std::size_t p = 0; p < k; ++p) {
      const Wide<T> av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
    }
    for (std::size_t j = 0; j < n; ++j) crow[j] = static_cast<T>(acc[j]);
  }
}

// C[M x N] += A[M x K] . B[N x K]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      Wide<T> acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<Wide<T>>(arow[p]) * brow[p];
      c[i * n + j] = static_cast<T>(acc);
    }
  }
}

// C[M x N] += A[K x M]^T . B[K x N]
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  std::vector<Wide<T>> acc(c, c + m * n);
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const Wide<T> av = arow[i];
      Wide<T>* crow = acc.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  for (std::size_t i = 0; i < m * n; ++i) c[i] = static_cast<T>(acc[i]);
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= 0) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> like(const Tensor<T>& t) {
  return Tensor<T>(t.shape());
}

// Shared by layer_norm and group_norm: normalizes each row in `groups`
// contiguous channel blocks. Saves xhat and 1/sigma for backward.
template <typename T>
Var<T> normalize_rows(const char* op, Var<T> x, Var<T> gain, Var<T> bias, std::size_t groups, T eps) {
  const Tensor<T>& xv = x.value();
  const std::size_t d = xv.cols();
  if (d == 0) throw DimensionError(std::string(op) + ": empty input");
  if (gain.value().size() != d || bias.value().size() != d) shape_mismatch(op, xv.shape(), gain.shape());
  if (groups == 0 || d % groups != 0) {
    throw DimensionError(std::string(op) + ": " + std::to_string(d) + " channels not divisible into " +
                         std::to_string(groups) + " groups");
  }
  const std::size_t rows = xv.rows();
  const std::size_t width = d / groups;
  Tensor<T> xhat = like(xv);
  Tensor<T> inv_sigma({rows, groups});
  Tensor<T> out = like(xv);
  const T* gv = gain.value().data();
  const T* bv = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t grp = 0; grp < groups; ++grp) {
      const std::size_t base = r * d + grp * width;
      T mean{0};
      for (std::size_t j = 0; j < width; ++j) mean += xv[base + j];
      mean /= T(width);
      T var{0};
      for (std::size_t j = 0; j < width; ++j) {
        const T c = xv[base + j] - mean;
        var += c * c;
      }
      var /= T(width);
      const T is = T{1} / std::sqrt(var + eps);
      inv_sigma(r, grp) = is;
      for (std::size_t j = 0; j < width; ++j) {
        const std::size_t ch = grp * width + j;
        const T h = (xv[base + j] - mean) * is;
        xhat[base + j] = h;
        out[base + j] = h * gv[ch] + bv[ch];
      }
    }
  }
  return x.graph().record(op, std::move(out), {x, gain, bias},
      [xi = x.id(), gi = gain.id(), bi = bias.id(), xhat = std::move(xhat), inv_sigma = std::move(inv_sigma),
       rows, d, groups, width](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        const T* gv = g.value(gi).data();
        if (g.requires_grad(gi)) {
          Tensor<T>& dg = g.grad_accumulator(gi);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) dg[c] += up[r * d + c] * xhat[r * d + c];
        }
        if (g.requires_grad(bi)) {
          Tensor<T>& db = g.grad_accumulator(bi);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) db[c] += up[r * d + c];
        }
        if (g.requires_grad(xi)) {
          Tensor<T>& dx = g.grad_accumulator(xi);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t grp = 0; grp < groups; ++grp) {
              const std::size_t base = r * d + grp * width;
              T mean_dh{0};
              T mean_dh_h{0};
              for (std::size_t j = 0; j < width; ++j) {
                const T dh = up[base + j] * gv[grp * width + j];
                mean_dh += dh;
                mean_dh_h += dh * xhat[base + j];
              }
              mean_dh /= T(width);
              mean_dh_h /= T(width);
              const T is = inv_sigma(r, grp);
              for (std::size_t j = 0; j < width; ++j) {
                const T dh = up[base + j] * gv[grp * width + j];
                dx[base + j] += is * (dh - mean_dh - xhat[base + j] * mean_dh_h);
              }
            }
          }
        }
      });
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_matrix("matmul", av.shape());
  require_matrix("matmul", bv.shape());
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  if (bv.shape()[0] != k) shape_mismatch("matmul", av.shape(), bv.shape());
  Tensor<T> out({m, n});
  gemm_nn(m, k, n, av.data(), bv.data(), out.data());
  return a.graph().record("matmul", std::move(out), {a, b},
      [ai = a.id(), bi = b.id(), m, k, n](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        if (g.requires_grad(ai)) gemm_nt(m, n, k, up.data(), g.value(bi).data(), g.grad_accumulator(ai).data());
        if (g.requires_grad(bi)) gemm_tn(k, m, n, g.value(ai).data(), up.data(), g.grad_accumulator(bi).data());
      });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_matrix("matmul_nt", av.shape());
  require_matrix("matmul_nt", bv.shape());
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[0];
  if (bv.shape()[1] != k) shape_mismatch("matmul_nt", av.shape(), bv.shape());
  Tensor<T> out({m, n});
  gemm_nt(m, k, n, av.data(), bv.data(), out.data());
  return a.graph().record("matmul_nt", std::move(out), {a, b},
      [ai = a.id(), bi = b.id(), m, k, n](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        if (g.requires_grad(ai)) gemm_nn(m, n, k, up.data(), g.value(bi).data(), g.grad_accumulator(ai).data());
        if (g.requires_grad(bi)) gemm_tn(n, m, k, up.data(), g.value(ai).data(), g.grad_accumulator(bi).data());
      });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.graph().record("add", std::move(out), {a, b}, [ai = a.id(), bi = b.id()](Graph<T>& g, std::size_t self) {
    const Tensor<T>& up = g.upstream(self);
    for (std::size_t id : {ai, bi}) {
      if (!g.requires_grad(id)) continue;
      Tensor<T>& d = g.grad_accumulator(id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) shape_mismatch("sub", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.graph().record("sub", std::move(out), {a, b}, [ai = a.id(), bi = b.id()](Graph<T>& g, std::size_t self) {
    const Tensor<T>& up = g.upstream(self);
    if (g.requires_grad(ai)) {
      Tensor<T>& d = g.grad_accumulator(ai);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i];
    }
    if (g.requires_grad(bi)) {
      Tensor<T>& d = g.grad_accumulator(bi);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= up[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.graph().record("mul", std::move(out), {a, b}, [ai = a.id(), bi = b.id()](Graph<T>& g, std::size_t self) {
    const Tensor<T>& up = g.upstream(self);
    if (g.requires_grad(ai)) {
      Tensor<T>& d = g.grad_accumulator(ai);
      const Tensor<T>& other = g.value(bi);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * other[i];
    }
    if (g.requires_grad(bi)) {
      Tensor<T>& d = g.grad_accumulator(bi);
      const Tensor<T>& other = g.value(ai);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * other[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  return a.graph().record("scale", std::move(out), {a}, [ai = a.id(), factor](Graph<T>& g, std::size_t self) {
    const Tensor<T>& up = g.upstream(self);
    Tensor<T>& d = g.grad_accumulator(ai);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * factor;
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = sigmoid_scalar(v);
  return x.graph().record("sigmoid", std::move(out), {x}, [xi = x.id()](Graph<T>& g, std::size_t self) {
    const Tensor<T>& up = g.upstream(self);
    const Tensor<T>& y = g.value(self);
    Tensor<T>& d = g.grad_accumulator(xi);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var<T> swish(Var<T> x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out = like(xv);
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * sigmoid_scalar(xv[i]);
  return x.graph().record("swish", std::move(out), {x}, [xi = x.id()](Graph<T>& g, std::size_t self) {
    const Tensor<T>& up = g.upstream(self);
    const Tensor<T>& xv = g.value(xi);
    Tensor<T>& d = g.grad_accumulator(xi);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const T s = sigmoid_scalar(xv[i]);
      d[i] += up[i] * (s + xv[i] * s * (T{1} - s));
    }
  });
}

template <typename T>
Var<T> glu(Var<T> x) {
  const Tensor<T>& xv = x.value();
  const std::size_t width = xv.cols();
  if (width % 2 != 0) throw DimensionError("glu: odd last extent in " + shape_str(xv.shape()));
  const std::size_t half = width / 2;
  const std::size_t rows = xv.rows();
  Shape shape = xv.shape();
  shape.back() = half;
  Tensor<T> out(shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < half; ++c) out[r * half + c] = xv[r * width + c] * sigmoid_scalar(xv[r * width + half + c]);
  return x.graph().record("glu", std::move(out), {x}, [xi = x.id(), rows, half, width](Graph<T>& g, std::size_t self) {
    const Tensor<T>& up = g.upstream(self);
    const Tensor<T>& xv = g.value(xi);
    Tensor<T>& d = g.grad_accumulator(xi);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < half; ++c) {
        const T a = xv[r * width + c];
        const T s = sigmoid_scalar(xv[r * width + half + c]);
        const T u = up[r * half + c];
        d[r * width + c] += u * s;
        d[r * width + half + c] += u * a * s * (T{1} - s);
      }
    }
  });
}

template <typename T>
Var<T> affine(Var<T> x, Var<T> weight, Var<T> bias) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  require_matrix("affine", wv.shape());
  const std::size_t in = wv.shape()[0], outw = wv.shape()[1];
  if (xv.cols() != in) shape_mismatch("affine", xv.shape(), wv.shape());
  if (bias.value().size() != outw) shape_mismatch("affine", wv.shape(), bias.shape());
  const std::size_t rows = xv.rows();
  Shape shape = xv.shape();
  shape.back() = outw;
  Tensor<T> out(shape);
  const T* bv = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < outw; ++c) out[r * outw + c] = bv[c];
  gemm_nn(rows, in, outw, xv.data(), wv.data(), out.data());
  return x.graph().record("affine", std::move(out), {x, weight, bias},
      [xi = x.id(), wi = weight.id(), bi = bias.id(), rows, in, outw](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        if (g.requires_grad(xi)) gemm_nt(rows, outw, in, up.data(), g.value(wi).data(), g.grad_accumulator(xi).data());
        if (g.requires_grad(wi)) gemm_tn(in, rows, outw, g.value(xi).data(), up.data(), g.grad_accumulator(wi).data());
        if (g.requires_grad(bi)) {
          Tensor<T>& db = g.grad_accumulator(bi);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < outw; ++c) db[c] += up[r * outw + c];
        }
      });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  return normalize_rows("layer_norm", x, gain, bias, 1, eps);
}

template <typename T>
Var<T> group_norm(Var<T> x, Var<T> gain, Var<T> bias, std::size_t groups, T eps) {
  return normalize_rows("group_norm", x, gain, bias, groups, eps);
}

template <typename T>
Var<T> conv1d_depthwise_causal(Var<T> x, Var<T> kernel) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& kv = kernel.value();
  require_matrix("conv1d_depthwise_causal", xv.shape());
  require_matrix("conv1d_depthwise_causal", kv.shape());
  const std::size_t steps = xv.shape()[0], d = xv.shape()[1], taps = kv.shape()[0];
  if (kv.shape()[1] != d) shape_mismatch("conv1d_depthwise_causal", xv.shape(), kv.shape());
  Tensor<T> out({steps, d});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < taps; ++k) {
      // source frame s = t - taps + 1 + k, skipped when negative
      if (t + 1 + k < taps) continue;
      const std::size_t s = t + 1 + k - taps;
      for (std::size_t c = 0; c < d; ++c) out[t * d + c] += kv[k * d + c] * xv[s * d + c];
    }
  }
  return x.graph().record("conv1d_depthwise_causal", std::move(out), {x, kernel},
      [xi = x.id(), ki = kernel.id(), steps, d, taps](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        const Tensor<T>& xv = g.value(xi);
        const Tensor<T>& kv = g.value(ki);
        Tensor<T>* dx = g.requires_grad(xi) ? &g.grad_accumulator(xi) : nullptr;
        Tensor<T>* dk = g.requires_grad(ki) ? &g.grad_accumulator(ki) : nullptr;
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t k = 0; k < taps; ++k) {
            if (t + 1 + k < taps) continue;
            const std::size_t s = t + 1 + k - taps;
            for (std::size_t c = 0; c < d; ++c) {
              const T u = up[t * d + c];
              if (dx) (*dx)[s * d + c] += kv[k * d + c] * u;
              if (dk) (*dk)[k * d + c] += xv[s * d + c] * u;
            }
          }
        }
      });
}

template <typename T>
Var<T> softmax_masked(Var<T> logits, const Tensor<T>& mask) {
  const Tensor<T>& lv = logits.value();
  if (!mask.empty() && mask.shape() != lv.shape()) shape_mismatch("softmax_masked", lv.shape(), mask.shape());
  const std::size_t rows = lv.rows(), width = lv.cols();
  const T blocked_below = T(kBlockedLogit / 2);
  Tensor<T> out = like(lv);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = lv.data() + r * width;
    const T* m = mask.empty() ? nullptr : mask.data() + r * width;
    T* y = out.data() + r * width;
    bool any = false;
    T max_v{0};
    for (std::size_t c = 0; c < width; ++c) {
      if (m && m[c] <= blocked_below) continue;
      const T v = z[c] + (m ? m[c] : T{0});
      if (!any || v > max_v) max_v = v;
      any = true;
    }
    if (!any) throw ContractError("softmax_masked: row " + std::to_string(r) + " is fully masked");
    T total{0};
    for (std::size_t c = 0; c < width; ++c) {
      if (m && m[c] <= blocked_below) {
        y[c] = T{0};
        continue;
      }
      y[c] = std::exp(z[c] + (m ? m[c] : T{0}) - max_v);
      total += y[c];
    }
    for (std::size_t c = 0; c < width; ++c) y[c] /= total;
  }
  return logits.graph().record("softmax_masked", std::move(out), {logits},
      [li = logits.id(), rows, width](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        const Tensor<T>& y = g.value(self);
        Tensor<T>& d = g.grad_accumulator(li);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t base = r * width;
          T dot{0};
          for (std::size_t c = 0; c < width; ++c) dot += up[base + c] * y[base + c];
          for (std::size_t c = 0; c < width; ++c) d[base + c] += y[base + c] * (up[base + c] - dot);
        }
      });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count) {
  const Tensor<T>& xv = x.value();
  const std::size_t width = xv.cols(), rows = xv.rows();
  if (count == 0 || begin + count > width) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_str(xv.shape()));
  }
  Shape shape = xv.shape();
  shape.back() = count;
  Tensor<T> out(shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out[r * count + c] = xv[r * width + begin + c];
  return x.graph().record("slice_cols", std::move(out), {x},
      [xi = x.id(), rows, width, begin, count](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        Tensor<T>& d = g.grad_accumulator(xi);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < count; ++c) d[r * width + begin + c] += up[r * count + c];
      });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts.front().value().rows();
  std::size_t width = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.value().rows() != rows) shape_mismatch("concat_cols", parts.front().shape(), p.shape());
    widths.push_back(p.value().cols());
    width += widths.back();
  }
  Shape shape = parts.front().shape();
  shape.back() = width;
  Tensor<T> out(shape);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor<T>& pv = parts[i].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[i]; ++c) out[r * width + offset + c] = pv[r * widths[i] + c];
    offset += widths[i];
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts.front().graph().record("concat_cols", std::move(out), parts,
      [ids, widths, rows, width](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (g.requires_grad(ids[i])) {
            Tensor<T>& d = g.grad_accumulator(ids[i]);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < widths[i]; ++c) d[r * widths[i] + c] += up[r * width + offset + c];
          }
          offset += widths[i];
        }
      });
}

template <typename T>
Var<T> film(Var<T> x, Var<T> y, Var<T> r_weight, Var<T> r_bias, Var<T> h_weight, Var<T> h_bias) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& yv = y.value();
  if (xv.shape() != yv.shape()) shape_mismatch("film", xv.shape(), yv.shape());
  const std::size_t rows = xv.rows(), d = xv.cols();
  for (const Var<T>* w : {&r_weight, &h_weight}) {
    if (w->shape() != Shape{d, d}) shape_mismatch("film", xv.shape(), w->shape());
  }
  for (const Var<T>* b : {&r_bias, &h_bias}) {
    if (b->value().size() != d) shape_mismatch("film", xv.shape(), b->shape());
  }
  Tensor<T> r(xv.shape());
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t c = 0; c < d; ++c) {
      r[i * d + c] = r_bias.value()[c];
      out[i * d + c] = h_bias.value()[c];
    }
  gemm_nn(rows, d, d, yv.data(), r_weight.value().data(), r.data());
  gemm_nn(rows, d, d, yv.data(), h_weight.value().data(), out.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += r[i] * xv[i];
  return x.graph().record("film", std::move(out), {x, y, r_weight, r_bias, h_weight, h_bias},
      [xi = x.id(), yi = y.id(), rwi = r_weight.id(), rbi = r_bias.id(), hwi = h_weight.id(), hbi = h_bias.id(),
       r = std::move(r), rows, d](Graph<T>& g, std::size_t self) {
        const Tensor<T>& up = g.upstream(self);
        const Tensor<T>& xv = g.value(xi);
        const Tensor<T>& yv = g.value(yi);
        if (g.requires_grad(xi)) {
          Tensor<T>& dx = g.grad_accumulator(xi);
          for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += up[i] * r[i];
        }
        // dr = up * x; dh = up
        Tensor<T> dr(xv.shape());
        for (std::size_t i = 0; i < dr.size(); ++i) dr[i] = up[i] * xv[i];
        if (g.requires_grad(yi)) {
          T* dy = g.grad_accumulator(yi).data();
          gemm_nt(rows, d, d, dr.data(), g.value(rwi).data(), dy);
          gemm_nt(rows, d, d, up.data(), g.value(hwi).data(), dy);
        }
        if (g.requires_grad(rwi)) gemm_tn(d, rows, d, yv.data(), dr.data(), g.grad_accumulator(rwi).data());
        if (g.requires_grad(hwi)) gemm_tn(d, rows, d, yv.data(), up.data(), g.grad_accumulator(hwi).data());
        if (g.requires_grad(rbi)) {
          Tensor<T>& db = g.grad_accumulator(rbi);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c = 0; c < d; ++c) db[c] += dr[i * d + c];
        }
        if (g.requires_grad(hbi)) {
          Tensor<T>& db = g.grad_accumulator(hbi);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c = 0; c < d; ++c) db[c] += up[i * d + c];
        }
      });
}

template <typename T>
Var<T> sum(Var<T> x) {
  long double total = 0;
  for (T v : x.value().values()) total += v;
  return x.graph().record("sum", Tensor<T>::scalar(static_cast<T>(total)), {x}, [xi = x.id()](Graph<T>& g, std::size_t self) {
    const T u = g.upstream(self)[0];
    Tensor<T>& d = g.grad_accumulator(xi);
    for (auto& v : d.values()) v += u;
  });
}

template <typename T>
Var<T> l1_l2_loss(Var<T> est, const Tensor<T>& target, std::size_t valid_rows) {
  const Tensor<T>& ev = est.value();
  if (ev.shape() != target.shape()) shape_mismatch("l1_l2_loss", ev.shape(), target.shape());
  if (valid_rows > ev.rows()) {
    throw DimensionError("l1_l2_loss: " + std::to_string(valid_rows) + " valid rows exceed " + shape_str(ev.shape()));
  }
  const std::size_t n = valid_rows * ev.cols();
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T diff = target[i] - ev[i];
    total += std::abs(diff) + diff * diff;
  }
  return est.graph().record("l1_l2_loss", Tensor<T>::scalar(static_cast<T>(total)), {est},
      [ei = est.id(), target, n](Graph<T>& g, std::size_t self) {
        const T u = g.upstream(self)[0];
        const Tensor<T>& ev = g.value(ei);
        Tensor<T>& d = g.grad_accumulator(ei);
        for (std::size_t i = 0; i < n; ++i) {
          const T diff = target[i] - ev[i];
          const T sign = diff > 0 ? T{1} : (diff < 0 ? T{-1} : T{0});
          // d/d est of |diff| + diff^2
          d[i] += u * (-sign - T{2} * diff);
        }
      });
}

template <typename T>
Tensor<T> make_attention_mask(std::size_t rows, std::size_t cols, bool causal, long lookback) {
  Tensor<T> mask({rows, cols});
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t s = 0; s < cols; ++s) {
      const bool future = s > t;
      const bool too_old = lookback >= 0 && t > s && t - s > static_cast<std::size_t>(lookback);
      if ((causal && future) || too_old) mask(t, s) = T(kBlockedLogit);
    }
  }
  return mask;
}

#define NOISECTX_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> matmul(Var<T>, Var<T>);                                                            \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                                         \
  template Var<T> add(Var<T>, Var<T>);                                                               \
  template Var<T> sub(Var<T>, Var<T>);                                                               \
  template Var<T> mul(Var<T>, Var<T>);                                                               \
  template Var<T> scale(Var<T>, T);                                                                  \
  template Var<T> sigmoid(Var<T>);                                                                   \
  template Var<T> swish(Var<T>);                                                                     \
  template Var<T> glu(Var<T>);                                                                       \
  template Var<T> affine(Var<T>, Var<T>, Var<T>);                                                    \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                             \
  template Var<T> group_norm(Var<T>, Var<T>, Var<T>, std::size_t, T);                                \
  template Var<T> conv1d_depthwise_causal(Var<T>, Var<T>);                                           \
  template Var<T> softmax_masked(Var<T>, const Tensor<T>&);                                          \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                                      \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                           \
  template Var<T> film(Var<T>, Var<T>, Var<T>, Var<T>, Var<T>, Var<T>);                              \
  template Var<T> sum(Var<T>);                                                                       \
  template Var<T> l1_l2_loss(Var<T>, const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> make_attention_mask(std::size_t, std::size_t, bool, long);

NOISECTX_INSTANTIATE_OPS(float)
NOISECTX_INSTANTIATE_OPS(double)

#undef NOISECTX_INSTANTIATE_OPS

}  // namespace noisectx
