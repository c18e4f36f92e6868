#pragma once

#include <vector>

#include "qicvt/gat/reversible_block.hpp"

namespace qicvt {

enum class StackDirection {
  kForward,  // f_L o ... o f_1
  kInverse,  // f_1^-1 o ... o f_L^-1
};

// Value-only evaluation of a block stack.
template <typename T>
BasicTensor<T> rev_stack_apply(const std::vector<BlockWeights<BasicTensor<T>>>& blocks, const BasicTensor<T>& x,
                               const BlockShape& shape, StackDirection direction);

// Differentiable block stack. With `recompute` the whole stack is recorded as
// one tape node holding only its output; backward rebuilds each block's input
// from its output through the opposite direction and differentiates a small
// local graph per block, so stored activations do not grow with depth.
// Without it every block op is recorded on the tape.
Var rev_stack(const std::vector<BlockWeights<Var>>& blocks, const Var& x, const BlockShape& shape,
              StackDirection direction, bool recompute = true);

}  // namespace qicvt
