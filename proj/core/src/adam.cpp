#include "noisectx/adam.hpp"

#include <cmath>

namespace noisectx {

template <typename T>
AdamState<T> AdamState<T>::fresh(const NamedTensors<T>& params, AdamOptions options) {
  AdamState s;
  s.options = options;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

template <typename T>
void adam_step(NamedTensors<T>& params, const NamedTensors<T>& grads, AdamState<T>& state) {
  for (const auto& [name, p] : params) {
    const Tensor<T>& g = grads.at(name);
    if (g.shape() != p.shape()) {
      throw DimensionError("adam: gradient " + shape_str(g.shape()) + " for parameter '" + name + "' of shape " +
                           shape_str(p.shape()));
    }
    if (!all_finite(g.values())) throw NumericalError("adam: non-finite gradient for parameter '" + name + "'");
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T correct1 = static_cast<T>(1.0 - std::pow(o.beta1, t));
  const T correct2 = static_cast<T>(1.0 - std::pow(o.beta2, t));
  const T b1 = static_cast<T>(o.beta1), b2 = static_cast<T>(o.beta2);
  const T lr = static_cast<T>(o.lr), eps = static_cast<T>(o.eps);
  for (auto& [name, p] : params) {
    const Tensor<T>& g = grads.at(name);
    Tensor<T>& m = state.m.at(name);
    Tensor<T>& v = state.v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const T m_hat = m[i] / correct1;
      const T v_hat = v[i] / correct2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(NamedTensors<float>&, const NamedTensors<float>&, AdamState<float>&);
template void adam_step(NamedTensors<double>&, const NamedTensors<double>&, AdamState<double>&);

}  // namespace noisectx
