#include "noisectx/graph.hpp"

namespace noisectx {

template <typename T>
Graph<T>::Graph(const NamedTensors<T>* parameters) : parameters_(parameters) {}

template <typename T>
Var<T> Graph<T>::push(Node node) {
  if (check_finite_ && !all_finite(node.borrowed ? node.borrowed->values() : node.owned.values())) {
    throw NumericalError("non-finite value produced by op '" + std::string(node.op) + "'");
  }
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.op = "constant";
  n.owned = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::variable(Tensor<T> value) {
  Node n;
  n.op = "variable";
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::param(const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) {
    return Var<T>(this, it->second);
  }
  if (parameters_ == nullptr) throw ContractError("graph has no parameter store (looking up '" + name + "')");
  const Tensor<T>* stored = parameters_->find(name);
  if (stored == nullptr) throw ContractError("unknown parameter '" + name + "'");
  Node n;
  n.op = "parameter";
  n.borrowed = stored;
  n.requires_grad = true;
  Var<T> v = push(std::move(n));
  param_nodes_.emplace(name, v.id());
  return v;
}

template <typename T>
Var<T> Graph<T>::record(std::string_view op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                        BackwardFn backward) {
  return record(op, std::move(value), std::vector<Var<T>>(inputs), std::move(backward));
}

template <typename T>
Var<T> Graph<T>::record(std::string_view op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                        BackwardFn backward) {
  Node n;
  n.op = op;
  n.owned = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (&in.graph() != this) throw ContractError("op '" + std::string(op) + "' mixes graphs");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
const Tensor<T>& Graph<T>::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.borrowed ? *n.borrowed : n.owned;
}

template <typename T>
Tensor<T>& Graph<T>::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad;
}

template <typename T>
NamedTensors<T> Graph<T>::backward(Var<T> loss) {
  if (&loss.graph() != this) throw ContractError("backward on a loss from another graph");
  if (loss.value().size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (backward_done_) throw ContractError("backward already ran on this graph");
  backward_done_ = true;

  grad_accumulator(loss.id())[0] = T{1};
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    if (!fault_op_.empty() && n.op == fault_op_) {
      for (auto& g : n.grad.values()) g *= fault_scale_;
    }
    n.backward(*this, i);
  }

  NamedTensors<T> grads;
  if (parameters_ == nullptr) return grads;
  for (const auto& [name, tensor] : *parameters_) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end() && !nodes_[it->second].grad.empty()) {
      grads.insert(name, nodes_[it->second].grad);
    } else {
      grads.insert(name, Tensor<T>(tensor.shape()));
    }
  }
  return grads;
}

template <typename T>
const Tensor<T>* Graph<T>::grad(Var<T> v) const {
  const Node& n = nodes_[v.id()];
  return n.grad.empty() ? nullptr : &n.grad;
}

template <typename T>
void Graph<T>::inject_backward_fault(std::string op, T scale) {
  fault_op_ = std::move(op);
  fault_scale_ = scale;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace noisectx
