#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qicvt/tensor/autodiff.hpp"

namespace qicvt {

// Builds a scalar from leaves on the given tape.
using ScalarGraphFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients of f against central differences for every
// coordinate of every input. Error per coordinate is
// |analytic - numeric| / max(1, |analytic|). h must lie in [1e-7, 1e-3].
GradCheckReport grad_check(const ScalarGraphFn& f, std::span<const Tensor> inputs, double h = 1e-5);

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double h = 1e-5);

}  // namespace qicvt
