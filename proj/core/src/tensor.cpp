#include "noisectx/tensor.hpp"

#include <cmath>
#include <cstring>

namespace noisectx {

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t checked_shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) {
    if (e == 0) throw DimensionError("zero extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

template <typename T>
Tensor<T> head_rows(const Tensor<T>& t, std::size_t rows) {
  if (rows == 0 || rows > t.rows()) {
    throw DimensionError("head_rows(" + std::to_string(rows) + ") of " + shape_str(t.shape()));
  }
  std::vector<T> values(t.data(), t.data() + rows * t.cols());
  return Tensor<T>({rows, t.cols()}, std::move(values));
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& top, const Tensor<T>& bottom) {
  if (top.cols() != bottom.cols()) {
    throw DimensionError("concat_rows " + shape_str(top.shape()) + " and " + shape_str(bottom.shape()));
  }
  std::vector<T> values(top.values().begin(), top.values().end());
  values.insert(values.end(), bottom.values().begin(), bottom.values().end());
  return Tensor<T>({top.rows() + bottom.rows(), top.cols()}, std::move(values));
}

template <typename T>
static bool finite_impl(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool all_finite(std::span<const float> values) { return finite_impl(values); }
bool all_finite(std::span<const double> values) { return finite_impl(values); }

template Tensor<float> head_rows(const Tensor<float>&, std::size_t);
template Tensor<double> head_rows(const Tensor<double>&, std::size_t);
template Tensor<float> concat_rows(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> concat_rows(const Tensor<double>&, const Tensor<double>&);

}  // namespace noisectx
