#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "noisectx/tensor.hpp"

namespace noisectx {

/// Insertion-ordered name -> tensor map. Holds model parameters, gradient
/// sets and optimizer moments; iteration order is deterministic.
template <typename T>
class NamedTensors {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  void insert(std::string name, Tensor<T> value) {
    if (index_.contains(name)) {
      throw ContractError("duplicate tensor name '" + name + "'");
    }
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(value));
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Tensor<T>& at(const std::string& name) { return entries_[position(name)].second; }
  const Tensor<T>& at(const std::string& name) const { return entries_[position(name)].second; }

  const Tensor<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Total scalar count across all tensors.
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// Same names and shapes, every value set to zero.
  NamedTensors zeros_like() const {
    NamedTensors out;
    for (const auto& [name, t] : entries_) out.insert(name, Tensor<T>(t.shape()));
    return out;
  }

  template <typename U>
  NamedTensors<U> cast() const {
    NamedTensors<U> out;
    for (const auto& [name, t] : entries_) out.insert(name, t.template cast<U>());
    return out;
  }

  friend bool operator==(const NamedTensors& a, const NamedTensors& b) { return a.entries_ == b.entries_; }

 private:
  std::size_t position(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("no tensor named '" + name + "'");
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace noisectx
