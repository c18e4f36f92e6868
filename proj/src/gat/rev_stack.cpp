#include "qicvt/gat/rev_stack.hpp"

#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

namespace {

template <typename V>
V step(const BlockWeights<V>& w, const V& x, const BlockShape& shape, StackDirection direction) {
  return direction == StackDirection::kForward ? reversible_block_forward(w, x, shape)
                                               : reversible_block_inverse(w, x, shape);
}

template <typename V>
V undo(const BlockWeights<V>& w, const V& y, const BlockShape& shape, StackDirection direction) {
  return direction == StackDirection::kForward ? reversible_block_inverse(w, y, shape)
                                               : reversible_block_forward(w, y, shape);
}

// Position of the block applied at step s.
std::size_t block_at(std::size_t s, std::size_t depth, StackDirection direction) {
  return direction == StackDirection::kForward ? s : depth - 1 - s;
}

}  // namespace

template <typename T>
BasicTensor<T> rev_stack_apply(const std::vector<BlockWeights<BasicTensor<T>>>& blocks, const BasicTensor<T>& x,
                               const BlockShape& shape, StackDirection direction) {
  BasicTensor<T> h = x;
  for (std::size_t s = 0; s < blocks.size(); ++s) h = step(blocks[block_at(s, blocks.size(), direction)], h, shape, direction);
  return h;
}

template Tensor rev_stack_apply<double>(const std::vector<BlockWeights<Tensor>>&, const Tensor&, const BlockShape&,
                                        StackDirection);
template TensorF rev_stack_apply<float>(const std::vector<BlockWeights<TensorF>>&, const TensorF&, const BlockShape&,
                                        StackDirection);

Var rev_stack(const std::vector<BlockWeights<Var>>& blocks, const Var& x, const BlockShape& shape,
              StackDirection direction, bool recompute) {
  const std::size_t depth = blocks.size();
  if (!recompute) {
    Var h = x;
    for (std::size_t s = 0; s < depth; ++s) h = step(blocks[block_at(s, depth, direction)], h, shape, direction);
    return h;
  }

  std::vector<BlockWeights<Tensor>> values(depth);
  std::vector<Var> inputs{x};
  for (std::size_t b = 0; b < depth; ++b) {
    for (std::size_t t = 0; t < kBlockTensorCount; ++t) {
      values[b][t] = blocks[b][t].value();
      inputs.push_back(blocks[b][t]);
    }
  }
  Tensor out = rev_stack_apply(values, x.value(), shape, direction);

  auto backward = [depth, shape, direction](BackwardScope& scope) {
    const auto weight_slot = [](std::size_t b, std::size_t t) { return 1 + b * kBlockTensorCount + t; };
    Tensor y = scope.value();
    Tensor gy = scope.grad();
    for (std::size_t s = depth; s-- > 0;) {
      const std::size_t b = block_at(s, depth, direction);
      BlockWeights<Tensor> w;
      for (std::size_t t = 0; t < kBlockTensorCount; ++t) w[t] = scope.input(weight_slot(b, t));
      const Tensor x_in = undo(w, y, shape, direction);

      Tape local;
      const Var xv = local.leaf(x_in);
      BlockWeights<Var> wv;
      for (std::size_t t = 0; t < kBlockTensorCount; ++t) wv[t] = local.leaf(w[t], scope.needs(weight_slot(b, t)));
      const Gradients g = local.backward(step(wv, xv, shape, direction), gy);
      for (std::size_t t = 0; t < kBlockTensorCount; ++t) {
        if (!scope.needs(weight_slot(b, t))) continue;
        Tensor& acc = scope.input_grad(weight_slot(b, t));
        acc = add(acc, g[wv[t]]);
      }
      gy = g[xv];
      y = x_in;
    }
    if (scope.needs(0)) {
      Tensor& acc = scope.input_grad(0);
      acc = add(acc, gy);
    }
  };
  return x.tape().record(std::move(out), std::move(inputs), std::move(backward));
}

}  // namespace qicvt
