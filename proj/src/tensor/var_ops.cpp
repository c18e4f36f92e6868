#include "qicvt/tensor/var_ops.hpp"

#include <cmath>
#include <string>

namespace qicvt {

namespace {

std::size_t repeats_of(const Shape& a, const Shape& b) {
  const std::size_t nb = shape_numel(b);
  return nb == 0 ? 0 : shape_numel(a) / nb;
}

// Adds `g` (shape of a) into `acc` (shape of b), summing over broadcast repeats.
void reduce_into(Tensor& acc, const Tensor& g) {
  const std::size_t inner = acc.numel();
  if (inner == 0) return;
  const std::size_t reps = g.numel() / inner;
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t i = 0; i < inner; ++i) acc[i] += g[r * inner + i];
}

void accumulate(Tensor& acc, const Tensor& g) {
  for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += g[i];
}

template <typename Deriv>
Var unary_op(const Var& x, Tensor value, Deriv deriv) {
  return x.tape().record(std::move(value), {x}, [deriv](BackwardScope& s) {
    const Tensor& in = s.input(0);
    const Tensor& out = s.value();
    Tensor& gx = s.input_grad(0);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += s.grad()[i] * deriv(in[i], out[i]);
  });
}

}  // namespace

Var constant_like(const Var& like, Tensor value) { return like.tape().constant(std::move(value)); }

Var add(const Var& a, const Var& b) {
  return a.tape().record(add(a.value(), b.value()), {a, b}, [](BackwardScope& s) {
    if (s.needs(0)) accumulate(s.input_grad(0), s.grad());
    if (s.needs(1)) reduce_into(s.input_grad(1), s.grad());
  });
}

Var sub(const Var& a, const Var& b) {
  return a.tape().record(sub(a.value(), b.value()), {a, b}, [](BackwardScope& s) {
    if (s.needs(0)) accumulate(s.input_grad(0), s.grad());
    if (s.needs(1)) {
      Tensor& gb = s.input_grad(1);
      const std::size_t inner = gb.numel();
      const std::size_t reps = repeats_of(s.grad().shape(), gb.shape());
      for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < inner; ++i) gb[i] -= s.grad()[r * inner + i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  return a.tape().record(mul(a.value(), b.value()), {a, b}, [](BackwardScope& s) {
    const Tensor& av = s.input(0);
    const Tensor& bv = s.input(1);
    const Tensor& g = s.grad();
    const std::size_t inner = bv.numel();
    const std::size_t reps = repeats_of(av.shape(), bv.shape());
    if (s.needs(0)) {
      Tensor& ga = s.input_grad(0);
      for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < inner; ++i) ga[r * inner + i] += g[r * inner + i] * bv[i];
    }
    if (s.needs(1)) {
      Tensor& gb = s.input_grad(1);
      for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < inner; ++i) gb[i] += g[r * inner + i] * av[r * inner + i];
    }
  });
}

Var scale(const Var& a, double factor) {
  return a.tape().record(scale(a.value(), factor), {a}, [factor](BackwardScope& s) {
    Tensor& ga = s.input_grad(0);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += factor * s.grad()[i];
  });
}

Var softplus(const Var& x) {
  return unary_op(x, softplus(x.value()), [](double in, double) { return scalar::sigmoid(in); });
}

Var gelu(const Var& x) {
  return unary_op(x, gelu(x.value()), [](double in, double) { return scalar::gelu_derivative(in); });
}

Var relu(const Var& x) {
  return unary_op(x, relu(x.value()), [](double in, double) { return in > 0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary_op(x, sigmoid(x.value()), [](double, double out) { return out * (1.0 - out); });
}

Var matmul(const Var& a, const Var& b) {
  return a.tape().record(matmul(a.value(), b.value()), {a, b}, [](BackwardScope& s) {
    const Tensor& av = s.input(0);
    const Tensor& bv = s.input(1);
    const Tensor& g = s.grad();
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (s.needs(0)) {
      Tensor& ga = s.input_grad(0);  // G B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (s.needs(1)) {
      Tensor& gb = s.input_grad(1);  // A^T G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av_ip = av[i * k + p];
          if (av_ip == 0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av_ip * g[i * n + j];
        }
    }
  });
}

Var transpose(const Var& a) {
  return a.tape().record(transpose(a.value()), {a}, [](BackwardScope& s) {
    accumulate(s.input_grad(0), transpose(s.grad()));
  });
}

Var reshape(const Var& x, Shape shape) {
  return x.tape().record(x.value().reshaped(std::move(shape)), {x}, [](BackwardScope& s) {
    accumulate(s.input_grad(0), s.grad());
  });
}

Var softmax(const Var& x) {
  return x.tape().record(softmax(x.value()), {x}, [](BackwardScope& s) {
    const Tensor& y = s.value();
    const Tensor& g = s.grad();
    Tensor& gx = s.input_grad(0);
    const std::size_t width = y.shape().back();
    if (width == 0) return;
    const std::size_t rows = y.numel() / width;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * width;
      double dot = 0;
      for (std::size_t j = 0; j < width; ++j) dot += g[base + j] * y[base + j];
      for (std::size_t j = 0; j < width; ++j) gx[base + j] += y[base + j] * (g[base + j] - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  Tensor value = layer_norm(x.value(), gain.value(), bias.value(), eps);
  return x.tape().record(std::move(value), {x, gain, bias}, [eps](BackwardScope& s) {
    const Tensor& xv = s.input(0);
    const Tensor& gv = s.input(1);
    const Tensor& g = s.grad();
    const std::size_t width = xv.shape().back();
    if (width == 0) return;
    const std::size_t rows = xv.numel() / width;
    std::vector<double> xhat(width), dxhat(width);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * width;
      double mean = 0;
      for (std::size_t j = 0; j < width; ++j) mean += xv[base + j];
      mean /= static_cast<double>(width);
      double var = 0;
      for (std::size_t j = 0; j < width; ++j) var += (xv[base + j] - mean) * (xv[base + j] - mean);
      var /= static_cast<double>(width);
      const double inv_std = 1.0 / std::sqrt(var + eps);
      double sum_d = 0, sum_dx = 0;
      for (std::size_t j = 0; j < width; ++j) {
        xhat[j] = (xv[base + j] - mean) * inv_std;
        dxhat[j] = g[base + j] * gv[j];
        sum_d += dxhat[j];
        sum_dx += dxhat[j] * xhat[j];
      }
      if (s.needs(0)) {
        Tensor& gx = s.input_grad(0);
        const double n = static_cast<double>(width);
        for (std::size_t j = 0; j < width; ++j) {
          gx[base + j] += inv_std / n * (n * dxhat[j] - sum_d - xhat[j] * sum_dx);
        }
      }
      if (s.needs(1)) {
        Tensor& gg = s.input_grad(1);
        for (std::size_t j = 0; j < width; ++j) gg[j] += g[base + j] * xhat[j];
      }
      if (s.needs(2)) {
        Tensor& gb = s.input_grad(2);
        for (std::size_t j = 0; j < width; ++j) gb[j] += g[base + j];
      }
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    values.push_back(p.value());
    sizes.push_back(p.shape().at(axis));
  }
  Tensor value = concat(std::span<const Tensor>(values), axis);
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(value), std::move(inputs),
                                [sizes, axis](BackwardScope& s) {
                                  auto pieces = split(s.grad(), std::span<const std::size_t>(sizes), axis);
                                  for (std::size_t i = 0; i < pieces.size(); ++i) {
                                    if (s.needs(i)) accumulate(s.input_grad(i), pieces[i]);
                                  }
                                });
}

std::vector<Var> split(const Var& x, std::span<const std::size_t> sizes, std::size_t axis) {
  std::vector<Tensor> pieces = split(x.value(), sizes, axis);
  std::vector<Var> out;
  out.reserve(pieces.size());
  const Shape& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::size_t total = shape[axis];
  std::size_t offset = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const std::size_t width = sizes[i];
    out.push_back(x.tape().record(std::move(pieces[i]), {x},
                                  [outer, inner, total, width, offset](BackwardScope& s) {
                                    Tensor& gx = s.input_grad(0);
                                    const Tensor& g = s.grad();
                                    const std::size_t block = width * inner;
                                    for (std::size_t o = 0; o < outer; ++o)
                                      for (std::size_t j = 0; j < block; ++j)
                                        gx[o * total * inner + offset * inner + j] += g[o * block + j];
                                  }));
    offset += width;
  }
  return out;
}

Var mean_rows(const Var& x) {
  return x.tape().record(mean_rows(x.value()), {x}, [](BackwardScope& s) {
    Tensor& gx = s.input_grad(0);
    const std::size_t n = gx.dim(0), c = gx.dim(1);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += s.grad()[j] * inv;
  });
}

Var sum(const Var& x) {
  double total = 0;
  for (double v : x.value().values()) total += v;
  return x.tape().record(Tensor::scalar(total), {x}, [](BackwardScope& s) {
    Tensor& gx = s.input_grad(0);
    const double g = s.grad()[0];
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

Var gather_rows(const Var& x, std::vector<std::size_t> rows) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("gather_rows: expected rank 2");
  const std::size_t c = xv.dim(1);
  Tensor out(Shape{rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.dim(0)) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(xv.data() + rows[i] * c, c, out.data() + i * c);
  }
  return x.tape().record(std::move(out), {x}, [rows = std::move(rows), c](BackwardScope& s) {
    Tensor& gx = s.input_grad(0);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gx[rows[i] * c + j] += s.grad()[i * c + j];
  });
}

Var scatter_rows(const Var& x, std::vector<std::size_t> rows, std::size_t total_rows) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.dim(0) != rows.size()) throw ShapeError("scatter_rows: row count mismatch");
  const std::size_t c = xv.dim(1);
  Tensor out(Shape{total_rows, c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= total_rows) throw ShapeError("scatter_rows: row index out of range");
    for (std::size_t j = 0; j < c; ++j) out[rows[i] * c + j] += xv[i * c + j];
  }
  return x.tape().record(std::move(out), {x}, [rows = std::move(rows), c](BackwardScope& s) {
    Tensor& gx = s.input_grad(0);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += s.grad()[rows[i] * c + j];
  });
}

Var scale_rows(const Var& x, const Var& w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 2 || wv.numel() != xv.dim(0)) throw ShapeError("scale_rows: need x (m,C) and w (m,1)");
  const std::size_t m = xv.dim(0), c = xv.dim(1);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * wv[i];
  require_finite(out, "scale_rows");
  return x.tape().record(std::move(out), {x, w}, [m, c](BackwardScope& s) {
    const Tensor& g = s.grad();
    if (s.needs(0)) {
      Tensor& gx = s.input_grad(0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i * c + j] * s.input(1)[i];
    }
    if (s.needs(1)) {
      Tensor& gw = s.input_grad(1);
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * s.input(0)[i * c + j];
        gw[i] += acc;
      }
    }
  });
}

Var gather_entries(const Var& x, std::vector<std::pair<std::size_t, std::size_t>> entries) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("gather_entries: expected rank 2");
  const std::size_t cols = xv.dim(1);
  Tensor out(Shape{entries.size(), 1});
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto [r, c] = entries[i];
    if (r >= xv.dim(0) || c >= cols) throw ShapeError("gather_entries: index out of range");
    out[i] = xv[r * cols + c];
  }
  return x.tape().record(std::move(out), {x}, [entries = std::move(entries), cols](BackwardScope& s) {
    Tensor& gx = s.input_grad(0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      gx[entries[i].first * cols + entries[i].second] += s.grad()[i];
    }
  });
}

Var pool_rows(const Var& x, std::vector<RowPool> pools) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("pool_rows: expected rank 2");
  const std::size_t c = xv.dim(1);
  Tensor out(Shape{pools.size(), c});
  for (std::size_t p = 0; p < pools.size(); ++p) {
    for (auto [row, weight] : pools[p]) {
      if (row >= xv.dim(0)) throw ShapeError("pool_rows: row index out of range");
      for (std::size_t j = 0; j < c; ++j) out[p * c + j] += weight * xv[row * c + j];
    }
  }
  require_finite(out, "pool_rows");
  return x.tape().record(std::move(out), {x}, [pools = std::move(pools), c](BackwardScope& s) {
    Tensor& gx = s.input_grad(0);
    for (std::size_t p = 0; p < pools.size(); ++p)
      for (auto [row, weight] : pools[p])
        for (std::size_t j = 0; j < c; ++j) gx[row * c + j] += weight * s.grad()[p * c + j];
  });
}

}  // namespace qicvt
