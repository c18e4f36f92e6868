#pragma once

// Graph-free forward kernels. These are the single source of numerics for the
// autodiff ops in var_ops.hpp and can also be run in 32-bit precision.

#include <span>
#include <string_view>
#include <vector>

#include "qicvt/tensor/tensor.hpp"

namespace qicvt {

namespace scalar {
double softplus(double x);
double sigmoid(double x);
double gelu(double x);
double gelu_derivative(double x);
}  // namespace scalar

// Throws NonFiniteError naming `op` if t holds NaN/Inf.
template <typename T>
void require_finite(const BasicTensor<T>& t, std::string_view op);

// Binary ops. `b` must either match `a` or equal a trailing suffix of a's shape,
// in which case it is repeated along the leading dims.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);

template <typename T>
BasicTensor<T> softplus(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

// Softmax over the last axis. -inf entries are allowed and map to exactly 0;
// a slice that is entirely -inf is an error.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x);

// Normalizes over the last axis with biased variance, then applies gain/bias.
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                          const BasicTensor<T>& bias, double eps);

template <typename T>
BasicTensor<T> concat(std::span<const BasicTensor<T>> parts, std::size_t axis);
template <typename T>
std::vector<BasicTensor<T>> split(const BasicTensor<T>& x, std::span<const std::size_t> sizes,
                                  std::size_t axis);

// (n, C) -> (1, C) column means.
template <typename T>
BasicTensor<T> mean_rows(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  return x.reshaped(std::move(shape));
}

}  // namespace qicvt
