#include "qicvt/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qicvt {

namespace {

double evaluate(const ScalarGraphFn& f, std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.constant(t));
  const Var out = f(tape, leaves);
  if (out.value().numel() != 1) throw ShapeError("grad_check: f must be scalar-valued");
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: f(x) is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarGraphFn& f, std::span<const Tensor> inputs, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("grad_check: h must lie in [1e-7, 1e-3]");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, true));
    const Var out = f(tape, leaves);
    if (out.value().numel() != 1) throw ShapeError("grad_check: f must be scalar-valued");
    if (!std::isfinite(out.value()[0])) throw NonFiniteError("grad_check: f(x) is not finite");
    const Gradients grads = tape.backward(out);
    for (const Var& leaf : leaves) analytic.push_back(grads[leaf]);
  }

  GradCheckReport report;
  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].numel(); ++i) {
      const double original = probe[k][i];
      probe[k][i] = original + h;
      const double up = evaluate(f, probe);
      probe[k][i] = original - h;
      const double down = evaluate(f, probe);
      probe[k][i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > report.max_rel_error) report = {err, k, i};
    }
  }
  return report;
}

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double h) {
  const Tensor inputs[] = {x};
  return grad_check([&f](Tape&, std::span<const Var> v) { return f(v[0]); }, inputs, h)
      .max_rel_error;
}

}  // namespace qicvt
