#pragma once

#include <span>
#include <vector>

#include "qicvt/tensor/params.hpp"

namespace qicvt {

enum class GateFormula {
  kCited,    // clean = x W_gate, plus eps * softplus(x W_noise) when training
  kLiteral,  // softplus(x * delta) W_gate with delta ~ N(1, sigma^2) when training
};

struct GateConfig {
  std::size_t experts = 4;  // N
  std::size_t k = 2;
  bool noise = true;
  GateFormula formula = GateFormula::kCited;
  double literal_sigma = 0.1;

  void validate() const;
};

// Selected expert indices per row, in descending-logit order.
using Selection = std::vector<std::vector<std::size_t>>;

// Noise for `rows` inputs; row r draws from rng.derive(r) so the values do
// not depend on evaluation order. Cited: (rows, N) standard normals.
// Literal: (rows, in_dim) samples of N(1, sigma^2).
Tensor sample_gate_noise(const Rng& rng, std::size_t rows, std::size_t in_dim, const GateConfig& cfg);

// x (m, D) -> (m, N). `noise` is used only when training with noise on.
Var gating_logits(const Var& x, const Var& w_gate, const Var& w_noise, const GateConfig& cfg, const Tensor* noise,
                  bool train);

// Top-k positions of one row; ties go to the lowest index.
std::vector<std::size_t> top_k_indices(std::span<const double> logits, std::size_t k);

// Softmax over the k surviving logits of each row, every other entry set to
// the -inf sentinel and therefore exactly 0. Throws std::invalid_argument
// unless 1 <= k <= N.
Tensor top_k_gate(const Tensor& logits, std::size_t k);

struct GateResult {
  Var weights;  // (m, N)
  Selection selection;
};

// Differentiable through the surviving logits; the selection itself is
// piecewise constant. `fixed` overrides the selection (gradient checks).
GateResult top_k_gate(const Var& logits, std::size_t k, const Selection* fixed = nullptr);

// Importance-variance balance term: coeff * CV^2 of the per-expert mean weight.
Var load_balance_loss(const Var& weights, double coeff);

}  // namespace qicvt
