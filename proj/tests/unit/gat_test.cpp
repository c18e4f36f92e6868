#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qicvt/gat/gat.hpp"
#include "qicvt/tensor/grad_check.hpp"
#include "qicvt/tensor/var_ops.hpp"

using namespace qicvt;

namespace {

Tensor randn(std::mt19937_64& rng, Shape shape, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

// Every block tensor random, gains included.
BlockWeights<Tensor> random_block(std::mt19937_64& rng, const BlockShape& shape) {
  ParamStore store;
  Rng init(rng());
  init_block(store, "b", shape, init, false);
  BlockWeights<Tensor> w = block_weights(store, "b");
  for (auto& t : w) t = randn(rng, t.shape(), 0.5);
  return w;
}

GatConfig small_config() {
  GatConfig cfg;
  cfg.image_channels = 8;
  cfg.image_tokens = 4;
  cfg.voxel_channels = 8;
  cfg.voxel_tokens = 8;
  cfg.heads = 2;
  cfg.global_tokens = 2;
  cfg.align_dim = 4;
  return cfg;
}

void randomize(ParamStore& store, std::mt19937_64& rng) {
  for (auto& [name, t] : store.all()) t = randn(rng, t.shape(), 0.4);
}

}  // namespace

TEST(TokenizeTest, ImageMapShapeAndRoundTrip) {
  std::mt19937_64 rng(31);
  const Tensor map = randn(rng, {8, 8, 16});
  const Tensor tokens = tokenize(map);
  EXPECT_EQ(tokens.shape(), (Shape{64, 16}));
  EXPECT_EQ(detokenize(tokens, map.shape()), map);
}

TEST(TokenizeTest, VolumeShapeAndRoundTrip) {
  std::mt19937_64 rng(32);
  const Tensor vol = randn(rng, {4, 4, 4, 32});
  EXPECT_EQ(tokenize(vol).shape(), (Shape{64, 32}));
  EXPECT_EQ(detokenize(tokenize(vol), vol.shape()), vol);
}

TEST(TokenizeTest, OddChannelsArePadded) {
  std::mt19937_64 rng(33);
  const Tensor vol = randn(rng, {2, 2, 2, 3});
  const Tensor tokens = tokenize(vol);
  EXPECT_EQ(tokens.shape(), (Shape{8, 4}));
  for (std::size_t r = 0; r < 8; ++r) EXPECT_EQ(tokens.at(r, 3), 0.0);
  EXPECT_EQ(detokenize(tokens, vol.shape()), vol);
  Tape tape;
  const Var v = tape.constant(vol);
  EXPECT_EQ(detokenize(tokenize(v), vol.shape()).value(), vol);
}

TEST(ReversibleBlockTest, OddChannelsRejected) {
  const BlockShape shape{7, 1, 1, 1e-5};
  EXPECT_THROW(shape.validate(), std::invalid_argument);
  EXPECT_THROW((BlockShape{8, 3, 1, 1e-5}.validate()), std::invalid_argument);
}

TEST(ReversibleBlockTest, ZeroResidualIsIdentity) {
  std::mt19937_64 rng(34);
  const BlockShape shape{16, 4, 4, 1e-5};
  ParamStore store;
  Rng init(1);
  init_block(store, "b", shape, init);
  const auto w = block_weights(store, "b");
  const Tensor x = randn(rng, {64, 16});
  EXPECT_EQ(reversible_block_forward(w, x, shape), x);
  EXPECT_EQ(reversible_block_inverse(w, x, shape), x);
}

TEST(ReversibleBlockTest, InverseRecoversInput64And32Bit) {
  std::mt19937_64 rng(35);
  std::uniform_int_distribution<std::size_t> tokens(1, 40);
  double worst64 = 0, worst32 = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const BlockShape shape{trial % 2 ? 16u : 8u, trial % 3 ? 4u : 2u, 1 + static_cast<std::size_t>(trial % 4), 1e-5};
    const auto w = random_block(rng, shape);
    const Tensor x = randn(rng, {tokens(rng), shape.channels});
    worst64 = std::max(worst64, max_abs_diff(reversible_block_inverse(w, reversible_block_forward(w, x, shape), shape), x));
    worst64 = std::max(worst64, max_abs_diff(reversible_block_forward(w, reversible_block_inverse(w, x, shape), shape), x));

    const auto wf = to_f32(w);
    const TensorF xf = x.cast<float>();
    worst32 = std::max(worst32, max_abs_diff(reversible_block_inverse(wf, reversible_block_forward(wf, xf, shape), shape), xf));
    worst32 = std::max(worst32, max_abs_diff(reversible_block_forward(wf, reversible_block_inverse(wf, xf, shape), shape), xf));
  }
  EXPECT_LE(worst64, 1e-10);
  EXPECT_LE(worst32, 1e-5);
}

TEST(ReversibleBlockTest, AttentionMapsAreDistributions) {
  std::mt19937_64 rng(36);
  const BlockShape shape{16, 4, 4, 1e-5};
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_block(rng, shape);
    AttentionTrace trace;
    reversible_block_forward(w, randn(rng, {30, 16}, 3.0), shape, &trace);
    ASSERT_EQ(trace.gather.size(), 4u);
    for (const auto* maps : {&trace.gather, &trace.distribute}) {
      for (const Tensor& m : *maps) {
        for (std::size_t r = 0; r < m.dim(0); ++r) {
          double total = 0;
          for (std::size_t c = 0; c < m.dim(1); ++c) {
            EXPECT_GE(m.at(r, c), 0.0);
            total += m.at(r, c);
          }
          EXPECT_NEAR(total, 1.0, 1e-6);
        }
      }
    }
    EXPECT_EQ(trace.gather[0].shape(), (Shape{4, 30}));
    EXPECT_EQ(trace.distribute[0].shape(), (Shape{30, 4}));
  }
}

TEST(ReversibleBlockTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(37);
  const BlockShape shape{8, 2, 2, 1e-5};
  for (int trial = 0; trial < 3; ++trial) {
    const auto w = random_block(rng, shape);
    std::vector<Tensor> inputs{randn(rng, {6, 8})};
    inputs.insert(inputs.end(), w.begin(), w.end());
    const Tensor probe = randn(rng, {6, 8});
    for (bool inverse : {false, true}) {
      const auto f = [&](Tape&, std::span<const Var> v) {
        BlockWeights<Var> wv;
        for (std::size_t t = 0; t < kBlockTensorCount; ++t) wv[t] = v[1 + t];
        const Var y = inverse ? reversible_block_inverse(wv, v[0], shape) : reversible_block_forward(wv, v[0], shape);
        return sum(mul(y, constant_like(y, probe)));
      };
      EXPECT_LE(grad_check(f, inputs, 1e-5).max_rel_error, 1e-4);
    }
  }
}

TEST(RevStackTest, RecomputeGradientsMatchRecordedGraph) {
  std::mt19937_64 rng(38);
  const BlockShape shape{8, 2, 2, 1e-5};
  std::vector<BlockWeights<Tensor>> blocks;
  for (int b = 0; b < 3; ++b) blocks.push_back(random_block(rng, shape));
  const Tensor x = randn(rng, {10, 8});
  const Tensor probe = randn(rng, {10, 8});
  for (StackDirection dir : {StackDirection::kForward, StackDirection::kInverse}) {
    std::vector<Tensor> grads[2];
    Tensor outs[2];
    for (int mode = 0; mode < 2; ++mode) {
      Tape tape;
      const Var xv = tape.leaf(x);
      std::vector<BlockWeights<Var>> wv(blocks.size());
      for (std::size_t b = 0; b < blocks.size(); ++b)
        for (std::size_t t = 0; t < kBlockTensorCount; ++t) wv[b][t] = tape.leaf(blocks[b][t]);
      const Var y = rev_stack(wv, xv, shape, dir, mode == 1);
      outs[mode] = y.value();
      const Gradients g = tape.backward(sum(mul(y, constant_like(y, probe))));
      grads[mode].push_back(g[xv]);
      for (const auto& bw : wv)
        for (const Var& t : bw) grads[mode].push_back(g[t]);
    }
    EXPECT_EQ(outs[0], outs[1]);
    for (std::size_t i = 0; i < grads[0].size(); ++i) EXPECT_LE(max_abs_diff(grads[0][i], grads[1][i]), 1e-9) << i;
  }
}

TEST(RevStackTest, ActivationMemoryConstantInDepth) {
  std::mt19937_64 rng(39);
  const BlockShape shape{16, 4, 4, 1e-5};
  const Tensor x = randn(rng, {64, 16});
  std::vector<std::size_t> recompute_bytes, stored_bytes;
  for (std::size_t depth : {2u, 4u, 8u}) {
    std::vector<BlockWeights<Tensor>> blocks;
    for (std::size_t b = 0; b < depth; ++b) blocks.push_back(random_block(rng, shape));
    for (bool recompute : {true, false}) {
      Tape tape;
      const Var xv = tape.leaf(x);
      std::vector<BlockWeights<Var>> wv(depth);
      for (std::size_t b = 0; b < depth; ++b)
        for (std::size_t t = 0; t < kBlockTensorCount; ++t) wv[b][t] = tape.leaf(blocks[b][t]);
      rev_stack(wv, xv, shape, StackDirection::kForward, recompute);
      (recompute ? recompute_bytes : stored_bytes).push_back(tape.activation_bytes());
    }
  }
  EXPECT_EQ(recompute_bytes[0], recompute_bytes[1]);
  EXPECT_EQ(recompute_bytes[1], recompute_bytes[2]);
  EXPECT_EQ(recompute_bytes[0], 64u * 16 * sizeof(double));
  EXPECT_LT(stored_bytes[0], stored_bytes[1]);
  EXPECT_LT(stored_bytes[1], stored_bytes[2]);
}

TEST(GatTest, IdentityAtInitialization) {
  std::mt19937_64 rng(40);
  GatConfig cfg;
  ParamStore store;
  Rng init(2);
  init_gat(store, cfg, init);
  Tape tape;
  BoundParams params(tape, store);
  const Var g_i = tape.constant(randn(rng, {8, 8, 16}));
  const Var g_v = tape.constant(randn(rng, {8, 8, 4, 16}));
  const Var y_f = forward_transform(params, g_i, cfg);
  EXPECT_EQ(y_f.shape(), (Shape{64, 16}));
  EXPECT_EQ(y_f.value(), tokenize(g_i.value()));
  const Var y_r = backward_transform(params, g_v, cfg);
  EXPECT_EQ(y_r.value(), tokenize(g_v.value()));
  const Var g_vi = fuse_global(params, y_f, y_r, g_i.shape(), cfg);
  EXPECT_EQ(g_vi.shape(), g_i.shape());
  EXPECT_EQ(g_vi.value(), g_i.value());
}

TEST(GatTest, SelectorInitReturnsForwardStream) {
  std::mt19937_64 rng(41);
  GatConfig cfg;
  ParamStore store;
  Rng init(3);
  init_gat(store, cfg, init, false);
  Tape tape;
  BoundParams params(tape, store);
  const Var g_i = tape.constant(randn(rng, {8, 8, 16}));
  const Var y_f = forward_transform(params, g_i, cfg);
  EXPECT_NE(y_f.value(), tokenize(g_i.value()));
  const Var y_r = backward_transform(params, tape.constant(randn(rng, {8, 8, 4, 16})), cfg);
  const Var g_vi = fuse_global(params, y_f, y_r, g_i.shape(), cfg);
  EXPECT_EQ(g_vi.value(), detokenize(y_f.value(), g_i.shape()));
}

TEST(GatTest, BackwardTransformIsInverseOfVoxelStack) {
  std::mt19937_64 rng(42);
  GatConfig cfg;
  ParamStore store;
  Rng init(4);
  init_gat(store, cfg, init);
  randomize(store, rng);
  Tape tape;
  BoundParams params(tape, store);
  const Tensor vol = randn(rng, {8, 8, 4, 16});
  const Var y_r = backward_transform(params, tape.constant(vol), cfg);
  const Tensor back =
      rev_stack_apply(stream_weights(store, "bwd", cfg.depth), y_r.value(), cfg.voxel_block(), StackDirection::kForward);
  EXPECT_LE(max_abs_diff(back, tokenize(vol)), 1e-10);
}

TEST(GatTest, EndToEndGradientCheck) {
  std::mt19937_64 rng(43);
  const GatConfig cfg = small_config();
  ParamStore store;
  Rng init(5);
  init_gat(store, cfg, init);
  randomize(store, rng);
  std::vector<std::string> names;
  std::vector<Tensor> inputs{randn(rng, {2, 2, 8}), randn(rng, {2, 2, 2, 8})};
  for (const auto& [name, t] : store.all()) {
    names.push_back(name);
    inputs.push_back(t);
  }
  const Tensor probe = randn(rng, {2, 2, 8});
  for (bool recompute : {true, false}) {
    GatConfig c = cfg;
    c.recompute = recompute;
    const auto f = [&](Tape& tape, std::span<const Var> v) {
      BoundParams params(tape, store);
      for (std::size_t i = 0; i < names.size(); ++i) params.set(names[i], v[2 + i]);
      const Var out = gat_forward(params, v[0], v[1], c);
      return sum(mul(out, constant_like(out, probe)));
    };
    const auto report = grad_check(f, inputs, 1e-5);
    EXPECT_LE(report.max_rel_error, 1e-4) << "input " << report.worst_input;
  }
}

TEST(GatTest, ShapeMismatchRejected) {
  GatConfig cfg;
  ParamStore store;
  Rng init(6);
  init_gat(store, cfg, init);
  Tape tape;
  BoundParams params(tape, store);
  EXPECT_THROW(forward_transform(params, tape.constant(Tensor(Shape{8, 8, 12})), cfg), ShapeError);
}
