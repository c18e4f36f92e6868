#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

#include "qicvt/tensor/tensor.hpp"

namespace qicvt {

class Tape;

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Handle to a value recorded on a Tape. Cheap to copy; the tape must outlive it.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const;
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// What a node's backward function sees: its output gradient, the recorded
// input values, and accumulators for the inputs that need gradients.
class BackwardScope {
 public:
  const Tensor& grad() const { return grad_; }
  const Tensor& value() const;
  const Tensor& input(std::size_t i) const;
  bool needs(std::size_t i) const;
  // Zero-initialized on first use; accumulate into it with +=.
  Tensor& input_grad(std::size_t i);

 private:
  friend class Tape;
  BackwardScope(Tape& tape, std::size_t node, const Tensor& grad)
      : tape_(tape), node_(node), grad_(grad) {}

  Tape& tape_;
  std::size_t node_;
  const Tensor& grad_;
};

class Gradients;

// Record-and-replay reverse-mode graph for one forward pass. Nodes are
// appended after their inputs, so insertion order is a topological order and
// a single reverse sweep visits every node exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void(BackwardScope&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf; `trainable` leaves receive entries in the Gradients returned by backward.
  Var leaf(Tensor value, bool trainable = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Records an op output. The backward function is dropped when no input
  // requires a gradient. Throws NonFiniteError on NaN/Inf in `value`.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  // Seeds d(output) = 1 everywhere (scalar outputs) or with `seed`.
  Gradients backward(const Var& output);
  Gradients backward(const Var& output, const Tensor& seed);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }
  // Bytes held by non-leaf values that backward() may read.
  std::size_t activation_bytes() const noexcept;

 private:
  friend class Var;
  friend class BackwardScope;
  friend class Gradients;

  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool trainable = false;
    bool leaf = false;
  };

  void check_owned(const Var& v) const;
  Tensor& grad_slot(std::size_t id);

  std::deque<Node> nodes_;  // deque: references to values stay valid while recording
  std::vector<Tensor> grads_;
  bool consumed_ = false;
};

// Gradients of trainable leaves after a backward sweep. Leaves the output did
// not depend on report a zero tensor of their shape.
class Gradients {
 public:
  const Tensor& operator[](const Var& leaf) const;

 private:
  friend class Tape;
  Gradients(const Tape& tape, std::vector<Tensor> grads) : tape_(&tape), grads_(std::move(grads)) {}

  const Tape* tape_;
  std::vector<Tensor> grads_;
};

}  // namespace qicvt
