#pragma once

#include <functional>
#include <vector>

#include "transms/tensor.hpp"

namespace transms::ad {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Index dim(std::size_t axis) const { return value().dim(axis); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the
/// tape order is already topological; backward() walks it once in reverse.
/// A tape is single-owner: do not record from several threads.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Var leaf(Tensor value);
  Var constant(Tensor value);

  /// Appends an op result. `backward` receives the output gradient and
  /// must route it to the parents through grad_for().
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward, const char* op);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward, const char* op);

  /// Gradient accumulator of `v`, or nullptr when `v` does not need one.
  Tensor* grad_for(const Var& v);

  void backward(const Var& loss);

  /// Gradient of `v` after backward(); zeros for disconnected leaves.
  Tensor grad(const Var& v) const;
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }
  const Tensor& value(int id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }

  /// Finite-value checking of recorded outputs (on by default).
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward, const char* op);

  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

}  // namespace transms::ad
