#include "noisectx/parameters.hpp"

#include <cmath>
#include <random>

namespace noisectx {

void ParameterLayout::add(std::string name, Shape shape, InitKind init) {
  if (contains(name)) throw ContractError("parameter '" + name + "' declared twice");
  checked_shape_size(shape);
  specs_.push_back({std::move(name), std::move(shape), init});
}

std::size_t ParameterLayout::scalar_count() const {
  std::size_t n = 0;
  for (const auto& s : specs_) n += checked_shape_size(s.shape);
  return n;
}

bool ParameterLayout::contains(const std::string& name) const {
  for (const auto& s : specs_) {
    if (s.name == name) return true;
  }
  return false;
}

template <typename T>
NamedTensors<T> initialize(const ParameterLayout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NamedTensors<T> out;
  for (const auto& spec : layout.specs()) {
    Tensor<T> t(spec.shape);
    switch (spec.init) {
      case InitKind::Zeros:
        break;
      case InitKind::Ones:
        t.fill(T{1});
        break;
      case InitKind::Glorot: {
        if (spec.shape.size() != 2) throw ContractError("glorot init needs a 2-D shape for '" + spec.name + "'");
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
        for (auto& v : t.values()) v = static_cast<T>((2.0 * unit_uniform(rng()) - 1.0) * limit);
        break;
      }
    }
    out.insert(spec.name, std::move(t));
  }
  return out;
}

template NamedTensors<float> initialize(const ParameterLayout&, std::uint64_t);
template NamedTensors<double> initialize(const ParameterLayout&, std::uint64_t);

}  // namespace noisectx
