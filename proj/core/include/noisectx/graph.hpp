#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "noisectx/named_tensors.hpp"
#include "noisectx/tensor.hpp"

namespace noisectx {

template <typename T>
class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the
/// graph lives.
template <typename T>
class Var {
 public:
  Var() = default;

  Graph<T>& graph() const noexcept { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  const Tensor<T>& value() const { return graph_->value(id_); }
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph<T>;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Records forward operations in topological order and replays them in
/// reverse to produce exact gradients of a scalar loss.
///
/// Parameters are leaves borrowed from a NamedTensors store, which must
/// outlive the graph. A graph is single-use: one forward, one backward.
template <typename T>
class Graph {
 public:
  /// Accumulates the node's upstream gradient into its inputs.
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(const NamedTensors<T>* parameters = nullptr);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  /// Differentiable leaf that is not a named parameter.
  Var<T> variable(Tensor<T> value);
  /// Leaf for a named parameter of the bound store. Repeated lookups return
  /// the same node.
  Var<T> param(const std::string& name);

  Var<T> record(std::string_view op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                BackwardFn backward);
  Var<T> record(std::string_view op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                BackwardFn backward);

  const Tensor<T>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::string_view op_name(std::size_t id) const { return nodes_[id].op; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Gradient flowing into node `id` (valid inside its BackwardFn).
  const Tensor<T>& upstream(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient buffer of node `id`, zero-initialized on first access.
  Tensor<T>& grad_accumulator(std::size_t id);

  /// Reverse pass from `loss`, which must hold exactly one value. Returns a
  /// gradient for every parameter in the bound store, in store order; those
  /// not reached by the loss get zeros.
  NamedTensors<T> backward(Var<T> loss);

  /// Gradient of any node after backward(); nullptr if it was never reached.
  const Tensor<T>* grad(Var<T> v) const;

  /// Scales the upstream gradient of every node tagged `op` by `scale`
  /// before its backward runs. Used to prove the gradient checker catches
  /// a broken backward.
  void inject_backward_fault(std::string op, T scale);

  void set_check_finite(bool enabled) noexcept { check_finite_ = enabled; }

 private:
  struct Node {
    std::string_view op;
    Tensor<T> owned;
    const Tensor<T>* borrowed = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    Tensor<T> grad;
  };

  Var<T> push(Node node);

  const NamedTensors<T>* parameters_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_nodes_;
  std::string fault_op_;
  T fault_scale_ = T{1};
  bool backward_done_ = false;
#ifdef NDEBUG
  bool check_finite_ = false;
#else
  bool check_finite_ = true;
#endif
};

}  // namespace noisectx
