#include "qicvt/tensor/conv.hpp"

#include <array>
#include <string>

namespace qicvt {

namespace {

struct ConvGeometry {
  std::array<std::size_t, 3> in{};
  std::array<std::size_t, 3> out{};
  std::array<std::size_t, 3> kernel{};
  std::size_t stride = 1;
  std::size_t cin = 0;
  std::size_t cout = 0;

  std::size_t taps() const { return kernel[0] * kernel[1] * kernel[2]; }
  std::size_t in_index(std::size_t u, std::size_t v, std::size_t w) const {
    return (u * in[1] + v) * in[2] + w;
  }
  std::size_t out_index(std::size_t u, std::size_t v, std::size_t w) const {
    return (u * out[1] + v) * out[2] + w;
  }

  // Calls f(out_site, in_site, tap) for every in-bounds tap.
  template <typename F>
  void for_each_tap(F&& f) const {
    for (std::size_t ou = 0; ou < out[0]; ++ou)
      for (std::size_t ov = 0; ov < out[1]; ++ov)
        for (std::size_t ow = 0; ow < out[2]; ++ow) {
          const std::size_t o = out_index(ou, ov, ow);
          std::size_t tap = 0;
          for (std::size_t ku = 0; ku < kernel[0]; ++ku)
            for (std::size_t kv = 0; kv < kernel[1]; ++kv)
              for (std::size_t kw = 0; kw < kernel[2]; ++kw, ++tap) {
                const long iu = static_cast<long>(ou * stride + ku) - static_cast<long>(kernel[0] / 2);
                const long iv = static_cast<long>(ov * stride + kv) - static_cast<long>(kernel[1] / 2);
                const long iw = static_cast<long>(ow * stride + kw) - static_cast<long>(kernel[2] / 2);
                if (iu < 0 || iv < 0 || iw < 0 || iu >= static_cast<long>(in[0]) ||
                    iv >= static_cast<long>(in[1]) || iw >= static_cast<long>(in[2])) {
                  continue;
                }
                f(o, in_index(static_cast<std::size_t>(iu), static_cast<std::size_t>(iv),
                              static_cast<std::size_t>(iw)),
                  tap);
              }
        }
  }
};

Var conv_impl(const Var& input, const Var& weight, const Var& bias, ConvGeometry geo,
              const char* name) {
  const Tensor& x = input.value();
  const Tensor& wt = weight.value();
  const Tensor& b = bias.value();
  if (wt.rank() != 2 || wt.dim(0) != geo.taps() * geo.cin) {
    throw ShapeError(std::string(name) + ": weight must be (" + std::to_string(geo.taps()) +
                     " * C_in, C_out), got " + shape_to_string(wt.shape()));
  }
  geo.cout = wt.dim(1);
  if (b.numel() != geo.cout) throw ShapeError(std::string(name) + ": bias width mismatch");
  if (geo.stride == 0) throw std::invalid_argument(std::string(name) + ": stride must be positive");
  for (int a = 0; a < 3; ++a) geo.out[a] = geo.in[a] == 0 ? 0 : (geo.in[a] - 1) / geo.stride + 1;

  const std::size_t n_in = geo.in[0] * geo.in[1] * geo.in[2];
  const std::size_t n_out = geo.out[0] * geo.out[1] * geo.out[2];
  std::vector<char> active(n_in, 0);
  for (std::size_t i = 0; i < n_in; ++i)
    for (std::size_t c = 0; c < geo.cin; ++c)
      if (x[i * geo.cin + c] != 0.0) {
        active[i] = 1;
        break;
      }

  Tensor out(Shape{n_out, geo.cout});
  for (std::size_t o = 0; o < n_out; ++o)
    for (std::size_t c = 0; c < geo.cout; ++c) out[o * geo.cout + c] = b[c];
  const std::size_t cin = geo.cin, cout = geo.cout;
  geo.for_each_tap([&](std::size_t o, std::size_t i, std::size_t tap) {
    if (!active[i]) return;
    const double* xi = x.data() + i * cin;
    const double* wk = wt.data() + tap * cin * cout;
    double* oo = out.data() + o * cout;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double xv = xi[ci];
      if (xv == 0.0) continue;
      const double* wrow = wk + ci * cout;
      for (std::size_t co = 0; co < cout; ++co) oo[co] += xv * wrow[co];
    }
  });

  Shape out_shape = x.shape();
  if (out_shape.size() == 4) {
    out_shape = {geo.out[0], geo.out[1], geo.out[2], cout};
  } else {
    out_shape = {geo.out[0], geo.out[1], cout};
  }
  return input.tape().record(
      out.reshaped(std::move(out_shape)), {input, weight, bias},
      [geo, active = std::move(active)](BackwardScope& s) {
        const Tensor& xv = s.input(0);
        const Tensor& wv = s.input(1);
        const Tensor& g = s.grad();
        const std::size_t cin = geo.cin, cout = geo.cout;
        Tensor* gx = s.needs(0) ? &s.input_grad(0) : nullptr;
        Tensor* gw = s.needs(1) ? &s.input_grad(1) : nullptr;
        if (s.needs(2)) {
          Tensor& gb = s.input_grad(2);
          const std::size_t n_out = g.numel() / cout;
          for (std::size_t o = 0; o < n_out; ++o)
            for (std::size_t c = 0; c < cout; ++c) gb[c] += g[o * cout + c];
        }
        if (!gx && !gw) return;
        geo.for_each_tap([&](std::size_t o, std::size_t i, std::size_t tap) {
          const double* go = g.data() + o * cout;
          if (gw && active[i]) {
            const double* xi = xv.data() + i * cin;
            double* gwk = gw->data() + tap * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double xval = xi[ci];
              if (xval == 0.0) continue;
              double* row = gwk + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) row[co] += xval * go[co];
            }
          }
          if (gx) {
            const double* wk = wv.data() + tap * cin * cout;
            double* gxi = gx->data() + i * cin;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* wrow = wk + ci * cout;
              double acc = 0;
              for (std::size_t co = 0; co < cout; ++co) acc += wrow[co] * go[co];
              gxi[ci] += acc;
            }
          }
        });
      });
}

}  // namespace

Var conv3d(const Var& input, const Var& weight, const Var& bias, std::size_t stride) {
  const Shape& s = input.shape();
  if (s.size() != 4) throw ShapeError("conv3d: expected (U, V, W, C) input, got " + shape_to_string(s));
  ConvGeometry geo;
  geo.in = {s[0], s[1], s[2]};
  geo.kernel = {3, 3, 3};
  geo.stride = stride;
  geo.cin = s[3];
  return conv_impl(input, weight, bias, geo, "conv3d");
}

Var conv2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride) {
  const Shape& s = input.shape();
  if (s.size() != 3) throw ShapeError("conv2d: expected (H, W, C) input, got " + shape_to_string(s));
  ConvGeometry geo;
  geo.in = {s[0], s[1], 1};
  geo.kernel = {3, 3, 1};
  geo.stride = stride;
  geo.cin = s[2];
  return conv_impl(input, weight, bias, geo, "conv2d");
}

}  // namespace qicvt
