#include "transms/autodiff.hpp"

namespace transms::ad {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Tensor value, bool requires_grad, BackwardFn backward, const char* op) {
  if (check_finite_) value.ensure_finite(op);
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Tensor value) { return push(std::move(value), true, nullptr, "leaf"); }

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr, "constant"); }

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward, const char* op) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) throw Error(std::string(op) + ": operand recorded on a different tape");
    needs = needs || nodes_[p.id_].requires_grad;
  }
  return push(std::move(value), needs, std::move(backward), op);
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn backward, const char* op) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) throw Error(std::string(op) + ": operand recorded on a different tape");
    needs = needs || nodes_[p.id_].requires_grad;
  }
  return push(std::move(value), needs, std::move(backward), op);
}

Tensor* Tape::grad_for(const Var& v) {
  Node& node = nodes_.at(v.id());
  if (!node.requires_grad) return nullptr;
  if (!node.has_grad) {
    node.grad = Tensor::zeros(node.value.shape());
    node.has_grad = true;
  }
  return &node.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw Error("backward: loss recorded on a different tape");
  Node& root = nodes_.at(loss.id());
  if (root.value.size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_string(root.value.shape()));
  if (!root.requires_grad) return;
  for (Node& n : nodes_) n.has_grad = false;
  Tensor* g = grad_for(loss);
  (*g)[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.has_grad || !node.backward) continue;
    node.backward(*this, node.grad);
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& node = nodes_.at(v.id());
  if (node.has_grad) return node.grad;
  return Tensor::zeros(node.value.shape());
}

}  // namespace transms::ad
