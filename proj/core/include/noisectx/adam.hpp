#pragma once

#include <cstdint>

#include "noisectx/named_tensors.hpp"

namespace noisectx {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  NamedTensors<T> m;
  NamedTensors<T> v;

  /// Zero moments shaped like `params`.
  static AdamState fresh(const NamedTensors<T>& params, AdamOptions options = {});
};

/// One bias-corrected Adam update of every parameter. Gradients are checked
/// for finiteness before anything is modified; a non-finite entry throws
/// NumericalError naming the parameter.
template <typename T>
void adam_step(NamedTensors<T>& params, const NamedTensors<T>& grads, AdamState<T>& state);

}  // namespace noisectx
