#include "qicvt/tensor/losses.hpp"

#include <cmath>

#include "qicvt/tensor/kernels.hpp"

namespace qicvt {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return -scalar::softplus(-x); }

}  // namespace

Var smooth_l1(const Var& pred, const Tensor& target, double beta) {
  require_same_shape(pred.value(), target, "smooth_l1");
  const Tensor& p = pred.value();
  double total = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double d = std::abs(p[i] - target[i]);
    total += d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
  }
  return pred.tape().record(Tensor::scalar(total), {pred}, [target, beta](BackwardScope& s) {
    const Tensor& pv = s.input(0);
    Tensor& g = s.input_grad(0);
    const double up = s.grad()[0];
    for (std::size_t i = 0; i < pv.numel(); ++i) {
      const double d = pv[i] - target[i];
      const double dd = std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : -1.0);
      g[i] += up * dd;
    }
  });
}

Var sigmoid_focal(const Var& logits, const Tensor& targets, double alpha, double gamma) {
  require_same_shape(logits.value(), targets, "sigmoid_focal");
  const Tensor& x = logits.value();
  double total = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const bool pos = targets[i] > 0.5;
    const double z = pos ? x[i] : -x[i];  // p_t = sigmoid(z)
    const double pt = scalar::sigmoid(z);
    const double a = pos ? alpha : 1.0 - alpha;
    total += -a * std::pow(1.0 - pt, gamma) * log_sigmoid(z);
  }
  return logits.tape().record(
      Tensor::scalar(total), {logits}, [targets, alpha, gamma](BackwardScope& s) {
        const Tensor& xv = s.input(0);
        Tensor& g = s.input_grad(0);
        const double up = s.grad()[0];
        for (std::size_t i = 0; i < xv.numel(); ++i) {
          const bool pos = targets[i] > 0.5;
          const double z = pos ? xv[i] : -xv[i];
          const double pt = scalar::sigmoid(z);
          const double a = pos ? alpha : 1.0 - alpha;
          // d/dz of -(1-pt)^gamma log(pt) = (1-pt)^gamma (gamma pt log pt + pt - 1)
          const double dz = a * std::pow(1.0 - pt, gamma) * (gamma * pt * log_sigmoid(z) + pt - 1.0);
          g[i] += up * (pos ? dz : -dz);
        }
      });
}

Var binary_cross_entropy_with_logits(const Var& logits, const Tensor& targets) {
  require_same_shape(logits.value(), targets, "binary_cross_entropy_with_logits");
  const Tensor& x = logits.value();
  double total = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    total += scalar::softplus(x[i]) - targets[i] * x[i];
  }
  return logits.tape().record(Tensor::scalar(total), {logits}, [targets](BackwardScope& s) {
    const Tensor& xv = s.input(0);
    Tensor& g = s.input_grad(0);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      g[i] += s.grad()[0] * (scalar::sigmoid(xv[i]) - targets[i]);
    }
  });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<std::size_t>& labels) {
  const Tensor& x = logits.value();
  if (x.rank() != 2 || x.dim(0) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: need (m, C) logits and m labels");
  }
  const std::size_t c = x.dim(1);
  Tensor probs = softmax(x);
  double total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= c) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    double mx = x[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[i * c + j]);
    double z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[i * c + j] - mx);
    total += std::log(z) + mx - x[i * c + labels[i]];
  }
  return logits.tape().record(Tensor::scalar(total), {logits},
                              [labels, probs = std::move(probs), c](BackwardScope& s) {
                                Tensor& g = s.input_grad(0);
                                const double up = s.grad()[0];
                                for (std::size_t i = 0; i < labels.size(); ++i)
                                  for (std::size_t j = 0; j < c; ++j) {
                                    const double onehot = j == labels[i] ? 1.0 : 0.0;
                                    g[i * c + j] += up * (probs[i * c + j] - onehot);
                                  }
                              });
}

}  // namespace qicvt
