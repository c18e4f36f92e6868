#include "qicvt/tensor/autodiff.hpp"

#include <string>

#include "qicvt/tensor/kernels.hpp"

namespace qicvt {

const Tensor& Var::value() const {
  if (!tape_) throw GraphError("use of an unbound Var");
  return tape_->nodes_[id_].value;
}

bool Var::requires_grad() const {
  if (!tape_) throw GraphError("use of an unbound Var");
  return tape_->nodes_[id_].requires_grad;
}

Tape& Var::tape() const {
  if (!tape_) throw GraphError("use of an unbound Var");
  return *tape_;
}

const Tensor& BackwardScope::value() const { return tape_.nodes_[node_].value; }

const Tensor& BackwardScope::input(std::size_t i) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs.at(i)].value;
}

bool BackwardScope::needs(std::size_t i) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs.at(i)].requires_grad;
}

Tensor& BackwardScope::input_grad(std::size_t i) {
  return tape_.grad_slot(tape_.nodes_[node_].inputs.at(i));
}

Var Tape::leaf(Tensor value, bool trainable) {
  require_finite(value, "leaf");
  Node node;
  node.value = std::move(value);
  node.requires_grad = trainable;
  node.trainable = trainable;
  node.leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
  if (v.tape_ != this) throw GraphError("Var belongs to a different tape");
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (consumed_) throw GraphError("cannot record on a tape after backward()");
  require_finite(value, "record");
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_slot(std::size_t id) {
  Tensor& g = grads_[id];
  if (g.shape().empty()) g = Tensor(nodes_[id].value.shape());
  return g;
}

Gradients Tape::backward(const Var& output) {
  check_owned(output);
  return backward(output, Tensor(output.shape(), 1.0));
}

Gradients Tape::backward(const Var& output, const Tensor& seed) {
  check_owned(output);
  if (consumed_) throw GraphError("graph already consumed by a previous backward()");
  if (seed.shape() != output.shape()) {
    throw ShapeError("backward seed " + shape_to_string(seed.shape()) + " does not match output " +
                     shape_to_string(output.shape()));
  }
  consumed_ = true;
  grads_.assign(nodes_.size(), Tensor());
  grads_[output.id_] = seed;
  for (std::size_t id = output.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.backward || grads_[id].shape().empty()) continue;
    require_finite(grads_[id], "backward");
    BackwardScope scope(*this, id, grads_[id]);
    node.backward(scope);
  }
  std::vector<Tensor> out(nodes_.size());
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].trainable) continue;
    out[id] = grads_[id].shape().empty() ? Tensor(nodes_[id].value.shape()) : std::move(grads_[id]);
  }
  grads_.clear();
  return Gradients(*this, std::move(out));
}

std::size_t Tape::activation_bytes() const noexcept {
  std::size_t bytes = 0;
  for (const Node& n : nodes_) {
    if (!n.leaf && n.requires_grad) bytes += n.value.numel() * sizeof(double);
  }
  return bytes;
}

const Tensor& Gradients::operator[](const Var& leaf) const {
  if (&leaf.tape() != tape_) throw GraphError("Var belongs to a different tape");
  const Tensor& g = grads_.at(leaf.id());
  if (g.shape().empty()) throw GraphError("gradient requested for a non-trainable node");
  return g;
}

}  // namespace qicvt
