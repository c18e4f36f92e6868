#pragma once

// Differentiable counterparts of the kernels in kernels.hpp. Names match the
// Tensor overloads so that generic code can run on either representation.

#include <span>
#include <utility>
#include <vector>

#include "qicvt/tensor/autodiff.hpp"
#include "qicvt/tensor/kernels.hpp"

namespace qicvt {

// Constant on the same tape as `like`.
Var constant_like(const Var& like, Tensor value);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);

Var softplus(const Var& x);
Var gelu(const Var& x);
Var relu(const Var& x);
Var sigmoid(const Var& x);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& x, Shape shape);

Var softmax(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);

Var concat(std::span<const Var> parts, std::size_t axis);
std::vector<Var> split(const Var& x, std::span<const std::size_t> sizes, std::size_t axis);

Var mean_rows(const Var& x);
// Sum of every element, shape (1).
Var sum(const Var& x);

// Row gather / scatter on (n, C) matrices. Scatter accumulates duplicate rows.
Var gather_rows(const Var& x, std::vector<std::size_t> rows);
Var scatter_rows(const Var& x, std::vector<std::size_t> rows, std::size_t total_rows);

// x (m, C) times per-row factor w (m, 1).
Var scale_rows(const Var& x, const Var& w);

// Picks x[row, col] for each pair into an (m, 1) column.
Var gather_entries(const Var& x, std::vector<std::pair<std::size_t, std::size_t>> entries);

// Each output row p is sum_j weight_j * x[row_j] over pools[p]; an empty pool
// yields a zero row.
using RowPool = std::vector<std::pair<std::size_t, double>>;
Var pool_rows(const Var& x, std::vector<RowPool> pools);

}  // namespace qicvt
