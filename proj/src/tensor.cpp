#include "adain/tensor.hpp"

#include <unordered_set>

namespace adain {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

template <class Scalar>
Variable<Scalar>::Variable(Tensor<Scalar> value, bool requires_grad)
    : node_(std::make_shared<NodeType>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <class Scalar>
Tensor<Scalar>& Variable<Scalar>::mutable_value() {
  if (!node_->is_leaf()) throw ContractError("mutable_value() on a non-leaf variable");
  return node_->value;
}

template <class Scalar>
const Tensor<Scalar>& Variable<Scalar>::grad() const {
  return node_->grad_buffer();
}

template <class Scalar>
Variable<Scalar> Variable<Scalar>::make_result(Tensor<Scalar> value, const char* op,
                                               std::initializer_list<Variable> inputs,
                                               BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Variable out(std::move(value), false);
  out.node_->op = op;
  if (!NoGradGuard::grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || (in.defined() && in.requires_grad());
  if (!any) return out;
  out.node_->requires_grad = true;
  for (const auto& in : inputs)
    if (in.defined()) out.node_->inputs.push_back(in.node_);
  out.node_->backward = std::move(backward);
  return out;
}

template <class Scalar>
void Variable<Scalar>::backward() const {
  if (shape().size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape().str());
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<NodeType*> order;
  std::unordered_set<NodeType*> visited;
  std::vector<std::pair<NodeType*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodeType* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodeType* n : order) {
    if (!n->is_leaf()) n->grad = Tensor<Scalar>(n->value.shape());
  }
  node_->grad_buffer().array() += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeType* n = *it;
    if (!n->is_leaf()) n->backward(n->grad);
  }
}

template class Variable<float>;
template class Variable<double>;

}  // namespace adain
