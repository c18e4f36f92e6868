#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "qicvt/tensor/autodiff.hpp"
#include "qicvt/tensor/conv.hpp"
#include "qicvt/tensor/grad_check.hpp"
#include "qicvt/tensor/kernels.hpp"
#include "qicvt/tensor/losses.hpp"
#include "qicvt/tensor/serialize.hpp"
#include "qicvt/tensor/var_ops.hpp"

using namespace qicvt;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

// Keeps values away from the ReLU kink so central differences stay valid.
Tensor away_from_zero(std::mt19937_64& rng, Shape shape) {
  Tensor t = random_tensor(rng, std::move(shape), 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.values()) v = sign(rng) ? v : -v;
  return t;
}

}  // namespace

TEST(TensorTest, ShapeInvariantEnforced) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t(Shape{2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(ElementwiseTest, SoftplusAtZeroIsLn2) {
  EXPECT_NEAR(softplus(Tensor::scalar(0.0))[0], 0.6931471805599453, 1e-15);
}

TEST(ElementwiseTest, SoftplusSaturatesWithoutOverflow) {
  // ln(1 + e^30) = 30.0000000000000935762...
  EXPECT_NEAR(softplus(Tensor::scalar(30.0))[0], 30.0, 1e-9);
  EXPECT_NEAR(softplus(Tensor::scalar(30.0))[0], 30.00000000000009357622968839737, 1e-13);
  EXPECT_NEAR(softplus(Tensor::scalar(800.0))[0], 800.0, 1e-12);
  EXPECT_NEAR(softplus(Tensor::scalar(-800.0))[0], 0.0, 1e-300);
}

TEST(ElementwiseTest, AddZeroIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(rng, {3, 4});
  EXPECT_EQ(add(x, Tensor(Shape{3, 4})), x);
  EXPECT_EQ(add(x, Tensor(Shape{4})), x);
}

TEST(ElementwiseTest, BroadcastsAlongLeadingDims) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor b = Tensor::vector({10, 20});
  EXPECT_EQ(add(a, b), Tensor::matrix({{11, 22}, {13, 24}}));
  EXPECT_THROW(add(a, Tensor::vector({1, 2, 3})), ShapeError);
}

TEST(ElementwiseTest, NonFiniteOutputRaises) {
  const Tensor big = Tensor::scalar(1e308);
  EXPECT_THROW(add(big, big), NonFiniteError);
}

TEST(MatmulTest, IdentityTimesMatrix) {
  std::mt19937_64 rng(2);
  const Tensor m = random_tensor(rng, {3, 5});
  Tensor eye(Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  EXPECT_EQ(matmul(eye, m), m);
}

TEST(MatmulTest, HandComputedProduct) {
  EXPECT_EQ(matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{0}, {1}})),
            Tensor::matrix({{2}, {4}}));
}

TEST(MatmulTest, ZeroMatrixAndDimensionMismatch) {
  std::mt19937_64 rng(3);
  const Tensor m = random_tensor(rng, {4, 2});
  EXPECT_EQ(matmul(Tensor(Shape{3, 4}), m), Tensor(Shape{3, 2}));
  EXPECT_THROW(matmul(Tensor(Shape{3, 3}), m), ShapeError);
}

TEST(SoftmaxTest, SymmetricInputIsUniform) {
  const Tensor y = softmax(Tensor::vector({0, 0, 0}));
  for (double v : y.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxTest, NegativeInfinitySentinel) {
  const double inf = std::numeric_limits<double>::infinity();
  const Tensor y = softmax(Tensor::vector({2.0, 1.0, -inf}));
  EXPECT_NEAR(y[0], 0.7310585786300048792, 1e-15);
  EXPECT_NEAR(y[1], 0.2689414213699951207, 1e-15);
  EXPECT_EQ(y[2], 0.0);
  EXPECT_THROW(softmax(Tensor::vector({-inf, -inf})), NonFiniteError);
}

TEST(SoftmaxTest, SingleElementSlice) { EXPECT_EQ(softmax(Tensor::vector({-7.5}))[0], 1.0); }

TEST(SoftmaxTest, SlicesFormASimplex) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor y = softmax(random_tensor(rng, {6, 9}, -30, 30));
    for (std::size_t r = 0; r < 6; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 9; ++c) {
        EXPECT_GE(y.at(r, c), 0.0);
        total += y.at(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(LayerNormTest, ConstantSliceGivesZeros) {
  const Tensor y = layer_norm(Tensor::vector({5, 5, 5, 5}), Tensor(Shape{4}, 1.0), Tensor(Shape{4}), 1e-5);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNormTest, ClosedFormTwoElements) {
  // mean 2, variance 1 -> [-1, 1]
  const Tensor y = layer_norm(Tensor::vector({1, 3}), Tensor(Shape{2}, 1.0), Tensor(Shape{2}), 1e-14);
  EXPECT_NEAR(y[0], -1.0, 1e-12);
  EXPECT_NEAR(y[1], 1.0, 1e-12);
}

TEST(LayerNormTest, ZeroGainReturnsBias) {
  std::mt19937_64 rng(5);
  const Tensor bias = random_tensor(rng, {4});
  const Tensor y = layer_norm(random_tensor(rng, {3, 4}), Tensor(Shape{4}), bias, 1e-5);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(y.at(r, c), bias[c]);
}

TEST(LayerNormTest, NormalizedMoments) {
  std::mt19937_64 rng(6);
  const Tensor y = layer_norm(random_tensor(rng, {5, 16}, -4, 9), Tensor(Shape{16}, 1.0), Tensor(Shape{16}), 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 16; ++c) mean += y.at(r, c) / 16;
    for (std::size_t c = 0; c < 16; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 16;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(ConcatSplitTest, ShapesAndSingleton) {
  std::mt19937_64 rng(7);
  const Tensor a = random_tensor(rng, {2, 3});
  const Tensor b = random_tensor(rng, {2, 5});
  const Tensor parts[] = {a, b};
  EXPECT_EQ(concat(std::span<const Tensor>(parts), 1).shape(), (Shape{2, 8}));
  EXPECT_EQ(concat(std::span<const Tensor>(parts, 1), 1), a);
  EXPECT_THROW(concat(std::span<const Tensor>(parts), 0), ShapeError);
}

TEST(ConcatSplitTest, RoundTripsAreExactOnEveryAxis) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> ext(1, 4);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t axis = trial % 3;
    Shape s1{ext(rng), ext(rng), ext(rng)};
    Shape s2 = s1;
    s2[axis] = ext(rng);
    const Tensor parts[] = {random_tensor(rng, s1), random_tensor(rng, s2)};
    const Tensor joined = concat(std::span<const Tensor>(parts), axis);
    const std::size_t sizes[] = {s1[axis], s2[axis]};
    const auto back = split(joined, std::span<const std::size_t>(sizes), axis);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], parts[0]);
    EXPECT_EQ(back[1], parts[1]);
    EXPECT_EQ(concat(std::span<const Tensor>(back), axis), joined);
  }
}

TEST(BackwardTest, SquareAtThree) {
  Tape tape;
  const Var x = tape.leaf(Tensor::scalar(3.0));
  const Gradients g = tape.backward(mul(x, x));
  EXPECT_DOUBLE_EQ(g[x][0], 6.0);
}

TEST(BackwardTest, SumOfSoftmaxHasZeroGradient) {
  std::mt19937_64 rng(9);
  Tape tape;
  const Var x = tape.leaf(random_tensor(rng, {7}, -3, 3));
  const Gradients g = tape.backward(sum(softmax(x)));
  for (double v : g[x].values()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(BackwardTest, UntouchedLeafGetsZeroAndGraphIsSingleUse) {
  Tape tape;
  const Var x = tape.leaf(Tensor::scalar(2.0));
  const Var unused = tape.leaf(Tensor(Shape{2, 2}, 1.0));
  const Var y = scale(x, 4.0);
  const Gradients g = tape.backward(y);
  EXPECT_EQ(g[unused], Tensor(Shape{2, 2}));
  EXPECT_DOUBLE_EQ(g[x][0], 4.0);
  EXPECT_THROW(tape.backward(y), GraphError);
  EXPECT_THROW(scale(x, 1.0), GraphError);
}

TEST(BackwardTest, DiamondGraphAccumulates) {
  Tape tape;
  const Var x = tape.leaf(Tensor::scalar(1.5));
  const Var a = scale(x, 2.0);
  const Var b = mul(x, x);
  const Gradients g = tape.backward(add(a, b));
  EXPECT_DOUBLE_EQ(g[x][0], 2.0 + 3.0);
}

TEST(BackwardTest, CompositeMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor inputs[] = {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2}), random_tensor(rng, {2})};
    const auto f = [](Tape&, std::span<const Var> v) {
      return sum(softplus(add(matmul(v[0], gelu(v[1])), v[2])));
    };
    EXPECT_LE(grad_check(f, inputs, 1e-5).max_rel_error, 1e-6);
  }
}

TEST(GradCheckTest, LinearFunctionIsExact) {
  std::mt19937_64 rng(11);
  const Tensor w = random_tensor(rng, {5});
  const double err = grad_check(
      [&w](const Var& x) { return sum(mul(x, constant_like(x, w))); }, random_tensor(rng, {5}), 1e-4);
  EXPECT_LE(err, 1e-10);
}

TEST(GradCheckTest, RejectsBadStepAndNonScalar) {
  const Tensor x = Tensor::vector({1, 2});
  EXPECT_THROW(grad_check([](const Var& v) { return sum(v); }, x, 1e-2), std::invalid_argument);
  EXPECT_THROW(grad_check([](const Var& v) { return v; }, x, 1e-5), ShapeError);
}

// Every differentiable op, 10 random inputs each, 64-bit.
TEST(GradCheckTest, EveryDifferentiableOp) {
  std::mt19937_64 rng(12);
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    ScalarGraphFn f;
    bool avoid_kink = false;
  };
  const Tensor weights = random_tensor(rng, {3, 4});
  const auto weighted = [weights](const Var& y) {
    return sum(mul(y, constant_like(y, weights)));
  };
  const std::vector<Case> cases = {
      {"add", {{3, 4}, {4}}, [&](Tape&, std::span<const Var> v) { return weighted(add(v[0], v[1])); }},
      {"sub", {{3, 4}, {3, 4}}, [&](Tape&, std::span<const Var> v) { return weighted(sub(v[0], v[1])); }},
      {"mul", {{3, 4}, {4}}, [&](Tape&, std::span<const Var> v) { return weighted(mul(v[0], v[1])); }},
      {"scale", {{3, 4}}, [&](Tape&, std::span<const Var> v) { return weighted(scale(v[0], -1.7)); }},
      {"softplus", {{3, 4}}, [&](Tape&, std::span<const Var> v) { return weighted(softplus(v[0])); }},
      {"gelu", {{3, 4}}, [&](Tape&, std::span<const Var> v) { return weighted(gelu(v[0])); }},
      {"relu", {{3, 4}}, [&](Tape&, std::span<const Var> v) { return weighted(relu(v[0])); }, true},
      {"sigmoid", {{3, 4}}, [&](Tape&, std::span<const Var> v) { return weighted(sigmoid(v[0])); }},
      {"matmul", {{3, 5}, {5, 4}}, [&](Tape&, std::span<const Var> v) { return weighted(matmul(v[0], v[1])); }},
      {"transpose", {{4, 3}}, [&](Tape&, std::span<const Var> v) { return weighted(transpose(v[0])); }},
      {"reshape", {{2, 6}}, [&](Tape&, std::span<const Var> v) { return weighted(reshape(v[0], {3, 4})); }},
      {"softmax", {{3, 4}}, [&](Tape&, std::span<const Var> v) { return weighted(softmax(v[0])); }},
      {"layer_norm", {{3, 4}, {4}, {4}},
       [&](Tape&, std::span<const Var> v) { return weighted(layer_norm(v[0], v[1], v[2], 1e-5)); }},
      {"concat", {{3, 1}, {3, 3}},
       [&](Tape&, std::span<const Var> v) { return weighted(concat(v, 1)); }},
      {"split", {{3, 4}},
       [&](Tape&, std::span<const Var> v) {
         const std::size_t sizes[] = {1, 3};
         auto parts = split(v[0], std::span<const std::size_t>(sizes), 1);
         const Var swapped[] = {parts[1], parts[0]};
         return weighted(concat(swapped, 1));
       }},
      {"mean_rows", {{5, 4}},
       [&](Tape&, std::span<const Var> v) {
         const Var m = mean_rows(v[0]);
         const Var rows[] = {m, m, m};
         return weighted(concat(rows, 0));
       }},
      {"gather_scatter", {{4, 4}},
       [&](Tape&, std::span<const Var> v) {
         return weighted(scatter_rows(gather_rows(v[0], {3, 1, 3}), {0, 2, 2}, 3));
       }},
      {"scale_rows", {{3, 4}, {3, 1}},
       [&](Tape&, std::span<const Var> v) { return weighted(scale_rows(v[0], v[1])); }},
      {"gather_entries", {{3, 4}},
       [&](Tape&, std::span<const Var> v) {
         return sum(mul(gather_entries(v[0], {{0, 1}, {2, 3}, {0, 1}}),
                        constant_like(v[0], Tensor(Shape{3, 1}, 0.7))));
       }},
      {"pool_rows", {{5, 4}},
       [&](Tape&, std::span<const Var> v) {
         return weighted(pool_rows(v[0], {{{0, 0.5}, {4, 0.5}}, {}, {{2, 1.0}, {3, -0.25}}}));
       }},
      {"conv3d", {{3, 4, 2, 2}, {27 * 2, 3}, {3}},
       [&](Tape&, std::span<const Var> v) {
         const Var y = conv3d(v[0], v[1], v[2], 2);
         return sum(mul(y, y));
       }},
      {"conv2d", {{5, 4, 3}, {9 * 3, 2}, {2}},
       [&](Tape&, std::span<const Var> v) {
         const Var y = conv2d(v[0], v[1], v[2], 1);
         return sum(mul(y, y));
       }},
      {"smooth_l1", {{3, 4}},
       [&](Tape&, std::span<const Var> v) { return smooth_l1(v[0], weights, 0.3); }},
      {"focal", {{3, 4}},
       [&](Tape&, std::span<const Var> v) {
         Tensor t(Shape{3, 4});
         t[1] = t[5] = t[11] = 1;
         return sigmoid_focal(v[0], t);
       }},
      {"bce", {{3, 4}},
       [&](Tape&, std::span<const Var> v) {
         Tensor t(Shape{3, 4});
         t[0] = t[7] = 1;
         return binary_cross_entropy_with_logits(v[0], t);
       }},
      {"softmax_xent", {{3, 4}},
       [&](Tape&, std::span<const Var> v) { return softmax_cross_entropy(v[0], {2, 0, 3}); }},
  };
  for (const Case& c : cases) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Tensor> inputs;
      for (const Shape& s : c.shapes) {
        inputs.push_back(c.avoid_kink ? away_from_zero(rng, s) : random_tensor(rng, s));
      }
      const double err = grad_check(c.f, inputs, 1e-5).max_rel_error;
      EXPECT_LE(err, 1e-6) << c.name << " trial " << trial;
    }
  }
}

TEST(DeterminismTest, IdenticalInputsGiveBitIdenticalResults) {
  const auto run = [] {
    std::mt19937_64 rng(13);
    Tape tape;
    const Var a = tape.leaf(random_tensor(rng, {8, 6}));
    const Var b = tape.leaf(random_tensor(rng, {6, 5}));
    const Var y = softmax(matmul(a, b));
    const Gradients g = tape.backward(sum(mul(y, y)));
    return std::make_pair(y.value(), g[a]);
  };
  EXPECT_EQ(run(), run());
}

TEST(ConvTest, ShapesAndSparseZeroInput) {
  Tape tape;
  const Var x = tape.constant(Tensor(Shape{8, 8, 8, 4}));
  const Var w = tape.constant(Tensor(Shape{27 * 4, 6}, 0.3));
  const Var b = tape.constant(Tensor(Shape{6}));
  const Var y = conv3d(x, w, b, 2);
  EXPECT_EQ(y.shape(), (Shape{4, 4, 4, 6}));
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvTest, SingleTapMatchesHandComputation) {
  // One active input voxel in the middle; centre tap weight 2 -> output 2 * x.
  Tape tape;
  Tensor x(Shape{3, 3, 3, 1});
  x[13] = 1.5;
  Tensor w(Shape{27, 1});
  w[13] = 2.0;
  const Var y = conv3d(tape.constant(x), tape.constant(w), tape.constant(Tensor(Shape{1}, 0.25)), 1);
  for (std::size_t i = 0; i < 27; ++i) EXPECT_DOUBLE_EQ(y.value()[i], i == 13 ? 3.25 : 0.25);
}

TEST(SerializeTest, RoundTripBothPrecisions) {
  std::mt19937_64 rng(14);
  const Tensor t = random_tensor(rng, {2, 3, 4});
  std::stringstream ss;
  write_tensor(ss, t, Precision::kF64);
  EXPECT_EQ(read_tensor(ss, Precision::kF64), t);

  std::stringstream sf;
  write_tensor(sf, t, Precision::kF32);
  const Tensor back = read_tensor(sf, Precision::kF32);
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_LE(max_abs_diff(back, t), 1e-7);
  EXPECT_EQ(sf.str().size(), 4u + 3 * 4u + 24 * 4u);
}

TEST(SerializeTest, LittleEndianHeader) {
  std::stringstream ss;
  write_tensor(ss, Tensor(Shape{2, 1}, 1.0), Precision::kF32);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 4u + 8u + 8u);
  EXPECT_EQ(bytes.substr(0, 4), std::string("\x02\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x02\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(12, 4), std::string("\x00\x00\x80\x3f", 4));
}

TEST(SerializeTest, TruncatedInputIsAnError) {
  std::stringstream ss;
  write_tensor(ss, Tensor(Shape{4}, 1.0), Precision::kF64);
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  EXPECT_THROW(read_tensor(cut, Precision::kF64), FormatError);
}
