#include "qicvt/self_moe/gating.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qicvt/tensor/kernels.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

void GateConfig::validate() const {
  if (experts == 0) throw std::invalid_argument("expert count must be >= 1");
  if (k == 0 || k > experts) {
    throw std::invalid_argument("top-k must satisfy 1 <= k <= N, got k=" + std::to_string(k) +
                                " N=" + std::to_string(experts));
  }
  if (!(literal_sigma >= 0.0)) throw std::invalid_argument("gate noise sigma must be >= 0");
}

Tensor sample_gate_noise(const Rng& rng, std::size_t rows, std::size_t in_dim, const GateConfig& cfg) {
  const bool literal = cfg.formula == GateFormula::kLiteral;
  const std::size_t cols = literal ? in_dim : cfg.experts;
  Tensor out(Shape{rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    Rng row = rng.derive(r);
    for (std::size_t c = 0; c < cols; ++c) {
      out.at(r, c) = literal ? row.normal(1.0, cfg.literal_sigma) : row.normal();
    }
  }
  return out;
}

Var gating_logits(const Var& x, const Var& w_gate, const Var& w_noise, const GateConfig& cfg, const Tensor* noise,
                  bool train) {
  const bool noisy = train && cfg.noise;
  if (noisy && !noise) throw std::invalid_argument("noisy gating needs a noise sample");
  if (cfg.formula == GateFormula::kLiteral) {
    const Var scaled = noisy ? mul(x, constant_like(x, *noise)) : x;
    return matmul(softplus(scaled), w_gate);
  }
  const Var clean = matmul(x, w_gate);
  if (!noisy) return clean;
  return add(clean, mul(constant_like(x, *noise), softplus(matmul(x, w_noise))));
}

std::vector<std::size_t> top_k_indices(std::span<const double> logits, std::size_t k) {
  if (k == 0 || k > logits.size()) throw std::invalid_argument("top-k must satisfy 1 <= k <= N");
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  order.resize(k);
  return order;
}

namespace {

Tensor masked_softmax(const Tensor& logits, const Selection& selection) {
  const std::size_t m = logits.dim(0), n = logits.dim(1);
  Tensor masked(logits.shape(), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i : selection[r]) masked[r * n + i] = logits[r * n + i];
  }
  return softmax(masked);
}

Selection select_rows(const Tensor& logits, std::size_t k) {
  const std::size_t m = logits.dim(0), n = logits.dim(1);
  Selection out(m);
  for (std::size_t r = 0; r < m; ++r) out[r] = top_k_indices(logits.values().subspan(r * n, n), k);
  return out;
}

void require_matrix(const Shape& s) {
  if (s.size() != 2) throw ShapeError("gate logits must be (m, N), got " + shape_to_string(s));
}

}  // namespace

Tensor top_k_gate(const Tensor& logits, std::size_t k) {
  require_matrix(logits.shape());
  if (k == 0 || k > logits.dim(1)) throw std::invalid_argument("top-k must satisfy 1 <= k <= N");
  return masked_softmax(logits, select_rows(logits, k));
}

GateResult top_k_gate(const Var& logits, std::size_t k, const Selection* fixed) {
  const Tensor& values = logits.value();
  require_matrix(values.shape());
  if (k == 0 || k > values.dim(1)) throw std::invalid_argument("top-k must satisfy 1 <= k <= N");
  Selection selection = fixed ? *fixed : select_rows(values, k);
  if (selection.size() != values.dim(0)) throw ShapeError("fixed selection row count mismatch");
  Tensor w = masked_softmax(values, selection);
  const std::size_t n = values.dim(1);
  // d logit_i = w_i (g_i - sum_j w_j g_j); unselected entries have w = 0.
  Var out = logits.tape().record(std::move(w), {logits}, [n](BackwardScope& s) {
    const Tensor& w = s.value();
    const Tensor& g = s.grad();
    Tensor& gx = s.input_grad(0);
    for (std::size_t r = 0; r < w.dim(0); ++r) {
      double dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += w[r * n + i] * g[r * n + i];
      for (std::size_t i = 0; i < n; ++i) gx[r * n + i] += w[r * n + i] * (g[r * n + i] - dot);
    }
  });
  return {out, std::move(selection)};
}

Var load_balance_loss(const Var& weights, double coeff) {
  const std::size_t n = weights.shape()[1];
  const Var importance = mean_rows(weights);
  const Var centered = sub(importance, constant_like(weights, Tensor(Shape{1, n}, 1.0 / static_cast<double>(n))));
  return scale(sum(mul(centered, centered)), coeff * static_cast<double>(n));
}

}  // namespace qicvt
