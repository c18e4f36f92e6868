#include "qicvt/tensor/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace qicvt {

namespace scalar {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace scalar

template <typename T>
void require_finite(const BasicTensor<T>& t, std::string_view op) {
  if (!t.all_finite()) {
    throw NonFiniteError(std::string(op) + ": non-finite value in output " +
                         shape_to_string(t.shape()));
  }
}

namespace {

// Number of times `b` repeats inside `a` (1 when shapes match).
template <typename T>
std::size_t broadcast_repeats(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return 1;
  if (sb.size() <= sa.size() && std::equal(sb.begin(), sb.end(), sa.end() - sb.size())) {
    return b.numel() == 0 ? 0 : a.numel() / b.numel();
  }
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_to_string(sb) + " onto " +
                   shape_to_string(sa));
}

template <typename T, typename F>
BasicTensor<T> binary(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op, F f) {
  const std::size_t reps = broadcast_repeats(a, b, op);
  BasicTensor<T> out(a.shape());
  const std::size_t inner = b.numel();
  for (std::size_t r = 0; r < reps; ++r) {
    const std::size_t base = r * inner;
    for (std::size_t i = 0; i < inner; ++i) out[base + i] = f(a[base + i], b[i]);
  }
  require_finite(out, op);
  return out;
}

template <typename T, typename F>
BasicTensor<T> unary(const BasicTensor<T>& x, const char* op, F f) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  require_finite(out, op);
  return out;
}

void require_rank2(const Shape& s, const char* op) {
  if (s.size() != 2) throw ShapeError(std::string(op) + ": expected rank 2, got " + shape_to_string(s));
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, "add", [](T x, T y) { return x + y; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, "sub", [](T x, T y) { return x - y; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, "mul", [](T x, T y) { return x * y; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  return unary(a, "scale", [factor](T x) { return x * factor; });
}

template <typename T>
BasicTensor<T> softplus(const BasicTensor<T>& x) {
  return unary(x, "softplus", [](T v) { return static_cast<T>(scalar::softplus(v)); });
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  return unary(x, "gelu", [](T v) { return static_cast<T>(scalar::gelu(v)); });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  return unary(x, "relu", [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return unary(x, "sigmoid", [](T v) { return static_cast<T>(scalar::sigmoid(v)); });
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank2(a.shape(), "matmul");
  require_rank2(b.shape(), "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  BasicTensor<T> out(Shape{m, n});
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  // i-p-j order: fixed summation order over p for every output element.
  for (std::size_t i = 0; i < m; ++i) {
    T* row = po + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = pa[i * k + p];
      if (av == T(0)) continue;
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  require_rank2(a.shape(), "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  BasicTensor<T> out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return out;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  const std::size_t width = x.shape().back();
  BasicTensor<T> out(x.shape());
  if (width == 0) return out;
  const std::size_t rows = x.numel() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * width;
    T* o = out.data() + r * width;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < width; ++j) {
      if (std::isnan(in[j]) || in[j] == std::numeric_limits<T>::infinity()) {
        throw NonFiniteError("softmax: NaN or +inf input");
      }
      mx = std::max(mx, in[j]);
    }
    if (mx == -std::numeric_limits<T>::infinity()) {
      throw NonFiniteError("softmax: every entry of a slice is -inf");
    }
    T total = 0;
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  return out;
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                          const BasicTensor<T>& bias, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("layer_norm: eps must be positive");
  const std::size_t width = x.shape().back();
  if (gain.numel() != width || bias.numel() != width) {
    throw ShapeError("layer_norm: gain/bias width must equal last axis of " +
                     shape_to_string(x.shape()));
  }
  BasicTensor<T> out(x.shape());
  if (width == 0) return out;
  const std::size_t rows = x.numel() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * width;
    T* o = out.data() + r * width;
    T mean = 0;
    for (std::size_t j = 0; j < width; ++j) mean += in[j];
    mean /= static_cast<T>(width);
    T var = 0;
    for (std::size_t j = 0; j < width; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<T>(width);
    const T inv_std = T(1) / std::sqrt(var + static_cast<T>(eps));
    for (std::size_t j = 0; j < width; ++j) o[j] = (in[j] - mean) * inv_std * gain[j] + bias[j];
  }
  require_finite(out, "layer_norm");
  return out;
}

template <typename T>
BasicTensor<T> concat(std::span<const BasicTensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape shape = parts[0].shape();
  if (axis >= shape.size()) throw ShapeError("concat: axis out of range");
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != shape.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != shape[d]) {
        throw ShapeError("concat: " + shape_to_string(s) + " incompatible with " +
                         shape_to_string(shape) + " on axis " + std::to_string(axis));
      }
    }
    total += s[axis];
  }
  shape[axis] = total;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  BasicTensor<T> out(shape);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t block = p.shape()[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data() + o * block, block, out.data() + o * total * inner + offset);
    }
    offset += block;
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> split(const BasicTensor<T>& x, std::span<const std::size_t> sizes,
                                  std::size_t axis) {
  const Shape& shape = x.shape();
  if (axis >= shape.size()) throw ShapeError("split: axis out of range");
  std::size_t total = 0;
  for (std::size_t s : sizes) total += s;
  if (total != shape[axis]) {
    throw ShapeError("split: sizes sum to " + std::to_string(total) + " but axis has " +
                     std::to_string(shape[axis]));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  std::vector<BasicTensor<T>> parts;
  parts.reserve(sizes.size());
  std::size_t offset = 0;
  for (std::size_t s : sizes) {
    Shape ps = shape;
    ps[axis] = s;
    BasicTensor<T> part(ps);
    const std::size_t block = s * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(x.data() + o * total * inner + offset, block, part.data() + o * block);
    }
    offset += block;
    parts.push_back(std::move(part));
  }
  return parts;
}

template <typename T>
BasicTensor<T> mean_rows(const BasicTensor<T>& x) {
  require_rank2(x.shape(), "mean_rows");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (n == 0) throw ShapeError("mean_rows: no rows");
  BasicTensor<T> out(Shape{1, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += x[i * c + j];
  for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<T>(n);
  return out;
}

#define QICVT_INSTANTIATE_KERNELS(T)                                                            \
  template void require_finite(const BasicTensor<T>&, std::string_view);                        \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                      \
  template BasicTensor<T> softplus(const BasicTensor<T>&);                                      \
  template BasicTensor<T> gelu(const BasicTensor<T>&);                                          \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                          \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                       \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                     \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                       \
  template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                     const BasicTensor<T>&, double);                            \
  template BasicTensor<T> concat(std::span<const BasicTensor<T>>, std::size_t);                 \
  template std::vector<BasicTensor<T>> split(const BasicTensor<T>&, std::span<const std::size_t>, \
                                             std::size_t);                                      \
  template BasicTensor<T> mean_rows(const BasicTensor<T>&);

QICVT_INSTANTIATE_KERNELS(float)
QICVT_INSTANTIATE_KERNELS(double)

#undef QICVT_INSTANTIATE_KERNELS

}  // namespace qicvt
