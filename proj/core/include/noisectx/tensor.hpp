#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "noisectx/errors.hpp"

namespace noisectx {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

/// Product of extents; throws DimensionError if any extent is zero.
std::size_t checked_shape_size(const Shape& shape);

/// Dense row-major array. Operations that take a `...xD` operand view the
/// tensor as rows() x cols(), where cols() is the last extent.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), values_(checked_shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (checked_shape_size(shape_) != values_.size()) {
      throw DimensionError("tensor of shape " + shape_str(shape_) + " given " +
                           std::to_string(values_.size()) + " values");
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
    return Tensor({rows, cols}, std::vector<T>(values));
  }

  static Tensor scalar(T value) { return Tensor({1}, std::vector<T>{value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : values_.size() / cols(); }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  T& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

  std::span<T> row(std::size_t r) noexcept { return {values_.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const noexcept { return {values_.data() + r * cols(), cols()}; }

  void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  /// Shape and bitwise-value equality.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<T> values_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Keeps the first `rows` rows of a `...xD` tensor as a 2-D tensor.
template <typename T>
Tensor<T> head_rows(const Tensor<T>& t, std::size_t rows);

/// Stacks rows of a 2-D tensor below another of equal width.
template <typename T>
Tensor<T> concat_rows(const Tensor<T>& top, const Tensor<T>& bottom);

bool all_finite(std::span<const float> values);
bool all_finite(std::span<const double> values);

}  // namespace noisectx
