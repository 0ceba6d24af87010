#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisectx/named_tensors.hpp"

namespace noisectx {

enum class InitKind {
  Glorot,  // uniform in +-sqrt(6 / (fan_in + fan_out)), fans from a 2-D shape
  Zeros,
  Ones,
};

struct ParamSpec {
  std::string name;
  Shape shape;
  InitKind init;
};

/// Names, shapes and initializers of a model's trainable tensors, in a
/// fixed declaration order.
class ParameterLayout {
 public:
  void add(std::string name, Shape shape, InitKind init);
  const std::vector<ParamSpec>& specs() const noexcept { return specs_; }
  std::size_t scalar_count() const;
  bool contains(const std::string& name) const;

 private:
  std::vector<ParamSpec> specs_;
};

/// Deterministic initialization: one mt19937_64 stream seeded with `seed`,
/// consumed in layout order.
template <typename T>
NamedTensors<T> initialize(const ParameterLayout& layout, std::uint64_t seed);

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace noisectx
