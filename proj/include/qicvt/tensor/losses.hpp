#pragma once

#include <vector>

#include "qicvt/tensor/autodiff.hpp"

namespace qicvt {

// All losses return a summed scalar (shape (1)); callers normalize.

// Huber-style smooth L1 with transition point `beta`.
Var smooth_l1(const Var& pred, const Tensor& target, double beta = 1.0);

// Sigmoid focal loss over logits with binary targets in {0, 1}.
Var sigmoid_focal(const Var& logits, const Tensor& targets, double alpha = 0.25, double gamma = 2.0);

Var binary_cross_entropy_with_logits(const Var& logits, const Tensor& targets);

// Rows of `logits` (m, C) against integer labels.
Var softmax_cross_entropy(const Var& logits, const std::vector<std::size_t>& labels);

}  // namespace qicvt
