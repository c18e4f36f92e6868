#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "qicvt/frontend/backbone.hpp"
#include "qicvt/frontend/geometry.hpp"
#include "qicvt/frontend/image_encoder.hpp"
#include "qicvt/frontend/pointcloud.hpp"
#include "qicvt/frontend/roi_pool.hpp"
#include "qicvt/frontend/rpn.hpp"
#include "qicvt/oracles/fps_oracle.hpp"
#include "qicvt/tensor/var_ops.hpp"

using namespace qicvt;

namespace {

VoxelGridSpec unit_grid(std::size_t u, std::size_t v, std::size_t w) {
  VoxelGridSpec s;
  s.origin = {0, 0, 0};
  s.voxel_size = {1, 1, 1};
  s.extents = {u, v, w};
  return s;
}

RawPointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> pos(lo, hi), refl(0, 1);
  RawPointCloud cloud(n);
  for (auto& p : cloud) p = {pos(rng), pos(rng), pos(rng), refl(rng)};
  return cloud;
}

FeatureVolume empty_volume(const VoxelGridSpec& spec) { return voxelize({}, spec); }

}  // namespace

TEST(GeometryTest, WrapAngleRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_NEAR(wrap_half_angle(3 * kPi / 4), -kPi / 4, 1e-12);
  EXPECT_DOUBLE_EQ(wrap_half_angle(kPi / 2), kPi / 2);
}

TEST(GeometryTest, BevIouSimpleCases) {
  const Box3 a{0, 0, 0, 2, 2, 1, 0};
  EXPECT_NEAR(bev_iou(a, a), 1.0, 1e-12);
  EXPECT_EQ(bev_iou(a, Box3{5, 0, 0, 2, 2, 1, 0}), 0.0);
  // A square is unchanged by a quarter turn.
  EXPECT_NEAR(bev_iou(a, Box3{0, 0, 0, 2, 2, 1, kPi / 2}), 1.0, 1e-12);
  // Half-overlapping squares: 2 / (4 + 4 - 2).
  EXPECT_NEAR(bev_iou(a, Box3{1, 0, 0, 2, 2, 1, 0}), 1.0 / 3.0, 1e-12);
}

TEST(GeometryTest, ContainmentInBoxFrame) {
  const Box3 b{0, 0, 0, 4, 1, 2, kPi / 2};
  EXPECT_TRUE(box_contains(b, 0, 1.9, 0.9));
  EXPECT_FALSE(box_contains(b, 1.9, 0, 0));
}

TEST(VoxelizeTest, MeanOfTwoPoints) {
  const RawPointCloud cloud = {{0.2, 0.2, 0.2, 0.2}, {0.6, 0.4, 0.8, 0.4}};
  const FeatureVolume vol = voxelize(cloud, unit_grid(2, 2, 2));
  EXPECT_NEAR(vol.data[3], 0.3, 1e-15);
  EXPECT_NEAR(vol.data[0], 0.4, 1e-15);
  EXPECT_EQ(vol.occupancy[0], 1);
  EXPECT_EQ(std::count(vol.occupancy.begin(), vol.occupancy.end(), 1), 1);
}

TEST(VoxelizeTest, EmptyCloudGivesEmptyVolume) {
  VoxelizeStats stats;
  const FeatureVolume vol = voxelize({}, unit_grid(4, 4, 4), &stats);
  EXPECT_EQ(vol.data.shape(), (Shape{4, 4, 4, 4}));
  for (double v : vol.data.values()) EXPECT_EQ(v, 0.0);
  for (auto o : vol.occupancy) EXPECT_EQ(o, 0);
  EXPECT_EQ(stats.in_bounds, 0u);
}

TEST(VoxelizeTest, OnePointPerVoxelKeepsAttributes) {
  const RawPointCloud cloud = {{0.5, 0.5, 0.5, 0.1}, {1.25, 0.75, 1.5, 0.9}};
  const FeatureVolume vol = voxelize(cloud, unit_grid(2, 2, 2));
  const std::size_t v1 = vol.spec.flat_index(1, 0, 1);
  EXPECT_EQ(vol.data[v1 * 4 + 0], 1.25);
  EXPECT_EQ(vol.data[v1 * 4 + 1], 0.75);
  EXPECT_EQ(vol.data[v1 * 4 + 2], 1.5);
  EXPECT_EQ(vol.data[v1 * 4 + 3], 0.9);
}

TEST(VoxelizeTest, OutOfBoundsPointsDroppedAndCounted) {
  const RawPointCloud cloud = {{-0.1, 0.5, 0.5, 0}, {0.5, 0.5, 0.5, 0}, {2.0, 0.5, 0.5, 0}};
  VoxelizeStats stats;
  voxelize(cloud, unit_grid(2, 2, 2), &stats);
  EXPECT_EQ(stats.dropped, 2u);
  EXPECT_EQ(stats.in_bounds, 1u);
}

TEST(VoxelizeTest, RecountMatchesInBoundsPoints) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const RawPointCloud cloud = random_cloud(rng, 200, -1, 9);
    VoxelizeStats stats;
    const FeatureVolume vol = voxelize(cloud, unit_grid(8, 8, 8), &stats);
    std::size_t inside = 0;
    for (const Point& p : cloud) {
      inside += (p.x >= 0 && p.x < 8 && p.y >= 0 && p.y < 8 && p.z >= 0 && p.z < 8) ? 1 : 0;
    }
    EXPECT_EQ(std::accumulate(stats.counts.begin(), stats.counts.end(), std::size_t{0}), inside);
    EXPECT_EQ(stats.in_bounds, inside);
    for (std::size_t v = 0; v < stats.counts.size(); ++v) EXPECT_EQ(vol.occupancy[v] != 0, stats.counts[v] > 0);
  }
}

TEST(VoxelizeTest, InvalidSpecRejected) {
  VoxelGridSpec s = unit_grid(2, 2, 2);
  s.voxel_size[1] = 0;
  EXPECT_THROW(voxelize({}, s), std::invalid_argument);
  EXPECT_THROW(validate_cloud({{0, 0, 0, 1.5}}), std::invalid_argument);
}

TEST(FpsTest, CollinearExample) {
  const RawPointCloud cloud = {{0, 0, 0, 0}, {1, 0, 0, 0}, {2, 0, 0, 0}, {9, 0, 0, 0}, {10, 0, 0, 0}};
  EXPECT_EQ(fps(cloud, 3, 0), (std::vector<std::size_t>{0, 4, 2}));
}

TEST(FpsTest, ExhaustionAndSingleton) {
  std::mt19937_64 rng(22);
  const RawPointCloud cloud = random_cloud(rng, 17, 0, 5);
  auto all = fps(cloud, 17, 3);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(17);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
  EXPECT_EQ(fps(cloud, 40, 0).size(), 17u);
  EXPECT_EQ(fps(cloud, 1, 5), (std::vector<std::size_t>{5}));
  EXPECT_TRUE(fps({}, 3, 0).empty());
}

TEST(FpsTest, TiesGoToLowestIndex) {
  // Points 1 and 2 are equidistant from the seed.
  const RawPointCloud cloud = {{0, 0, 0, 0}, {0, 1, 0, 0}, {1, 0, 0, 0}, {0.5, 0, 0, 0}};
  EXPECT_EQ(fps(cloud, 2, 0)[1], 1u);
}

TEST(FpsTest, ReflectanceDoesNotAffectDistance) {
  const RawPointCloud cloud = {{0, 0, 0, 0}, {1, 0, 0, 1}, {2, 0, 0, 0}};
  EXPECT_EQ(fps(cloud, 2, 0)[1], 2u);
}

TEST(FpsTest, MatchesBruteForceOracle) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> size(1, 64);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = size(rng);
    const RawPointCloud cloud = random_cloud(rng, n, -5, 5);
    const std::size_t k = 1 + rng() % n;
    const std::size_t seed = rng() % n;
    const auto got = fps(cloud, k, seed);
    EXPECT_EQ(got, oracle::fps_bruteforce(cloud, k, seed)) << "trial " << trial;
    EXPECT_EQ(std::set<std::size_t>(got.begin(), got.end()).size(), got.size());
    EXPECT_EQ(got, fps(cloud, k, seed));
  }
}

class StagesTest : public ::testing::Test {
 protected:
  StagesTest() {
    Rng rng(5);
    init_backbone(store, cfg, rng);
  }
  BackboneConfig cfg;
  ParamStore store;
};

TEST_F(StagesTest, StrideContractOnEightCube) {
  Tape tape;
  BoundParams params(tape, store);
  std::mt19937_64 rng(24);
  const FeatureVolume base = voxelize(random_cloud(rng, 100, 0, 8), unit_grid(8, 8, 8));
  const StageVolumes out = downsample_stages(params, base, cfg);
  const std::size_t expect[4] = {8, 4, 2, 1};
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(out.features[s].shape(), (Shape{expect[s], expect[s], expect[s], cfg.widths[s + 1]}));
    EXPECT_EQ(out.specs[s].extents[0], expect[s]);
    EXPECT_DOUBLE_EQ(out.specs[s].voxel_size[0], static_cast<double>(kStageStrides[s]));
  }
}

TEST_F(StagesTest, DefaultDeskGridShapes) {
  VoxelGridSpec spec{{0, -10, -1}, {1.25, 1.25, 0.5}, {16, 16, 8}};
  Tape tape;
  BoundParams params(tape, store);
  const StageVolumes out = downsample_stages(params, empty_volume(spec), cfg);
  EXPECT_EQ(out.features[2].shape(), (Shape{4, 4, 2, cfg.widths[3]}));
  EXPECT_EQ(out.features[3].shape(), (Shape{2, 2, 1, cfg.widths[4]}));
}

TEST_F(StagesTest, NonDivisibleExtentsRejected) {
  Tape tape;
  BoundParams params(tape, store);
  EXPECT_THROW(downsample_stages(params, empty_volume(unit_grid(16, 16, 12)), cfg), std::invalid_argument);
}

TEST_F(StagesTest, ZeroInputZeroBiasGivesZero) {
  Tape tape;
  BoundParams params(tape, store);
  const StageVolumes out = downsample_stages(params, empty_volume(unit_grid(8, 8, 8)), cfg);
  for (const Var& v : out.features) {
    for (double x : v.value().values()) EXPECT_EQ(x, 0.0);
  }
}

TEST(RpnTest, EncodeDecodeRoundTrip) {
  const Box3 anchor{2, 3, 0.8, 4.5, 1.9, 1.6, 0};
  const Box3 target{2.7, 2.1, 0.9, 4.0, 2.1, 1.5, 0.4};
  const auto d = encode_box(anchor, target);
  const Box3 back = decode_box(anchor, d);
  EXPECT_NEAR(back.cx, target.cx, 1e-12);
  EXPECT_NEAR(back.cy, target.cy, 1e-12);
  EXPECT_NEAR(back.cz, target.cz, 1e-12);
  EXPECT_NEAR(back.l, target.l, 1e-12);
  EXPECT_NEAR(back.w, target.w, 1e-12);
  EXPECT_NEAR(back.h, target.h, 1e-12);
  EXPECT_NEAR(back.yaw, target.yaw, 1e-12);
  // A flipped heading shares the axis target.
  Box3 flipped = target;
  flipped.yaw = wrap_angle(target.yaw + kPi);
  EXPECT_NEAR(decode_box(anchor, encode_box(anchor, flipped)).yaw, target.yaw, 1e-12);
}

class RpnFixture : public ::testing::Test {
 protected:
  RpnFixture() {
    Rng rng(6);
    init_backbone(store, backbone, rng);
    init_rpn(store, backbone, spec, rpn_cfg, rng);
  }
  void zero_head() {
    for (const char* name : {"rpn.fc2.w", "rpn.fc2.b"}) {
      for (auto& v : store.get(name).values()) v = 0;
    }
  }
  BackboneConfig backbone;
  RpnConfig rpn_cfg;
  VoxelGridSpec spec{{0, -10, -1}, {1.25, 1.25, 0.5}, {16, 16, 8}};
  ParamStore store;
};

TEST_F(RpnFixture, ZeroHeadGivesUniformSortedProposals) {
  zero_head();
  std::mt19937_64 rng(25);
  RawPointCloud cloud = random_cloud(rng, 300, 0, 10);
  Tape tape;
  BoundParams params(tape, store);
  const auto volumes = downsample_stages(params, voxelize(cloud, spec), backbone);
  const auto rpn = rpn_forward(params, volumes, rpn_cfg);
  EXPECT_EQ(rpn.anchors.size(), 16u * 3);
  const auto props = propose_rois(rpn, 10, rpn_cfg);
  ASSERT_LE(props.size(), 10u);
  ASSERT_FALSE(props.empty());
  for (const auto& p : props) {
    EXPECT_DOUBLE_EQ(p.score, 0.5);
    EXPECT_GT(p.box.yaw, -kPi);
    EXPECT_LE(p.box.yaw, kPi);
  }
  // Uniform scores keep anchor order.
  for (std::size_t i = 1; i < props.size(); ++i) EXPECT_LT(props[i - 1].anchor, props[i].anchor);
  EXPECT_TRUE(propose_rois(rpn, 0, rpn_cfg).empty());
}

TEST_F(RpnFixture, DominantCellRanksFirst) {
  zero_head();
  // Objectness of the pedestrian anchor reads hidden unit 0.
  store.get("rpn.fc2.w").at(0, 1 * kRpnOutputs) = 1.0;
  RawPointCloud cloud;
  for (int i = 0; i < 20; ++i) cloud.push_back({12.0 + 0.05 * i, 3.0, 0.5, 1.0});
  Tape tape;
  BoundParams params(tape, store);
  const auto volumes = downsample_stages(params, voxelize(cloud, spec), backbone);
  const auto rpn = rpn_forward(params, volumes, rpn_cfg);

  // Score-sort oracle on the same raw output.
  const Tensor& raw = rpn.raw.value();
  std::size_t best = 0;
  for (std::size_t a = 1; a < rpn.anchors.size(); ++a) {
    if (raw.at(a, 0) > raw.at(best, 0)) best = a;
  }
  ASSERT_GT(raw.at(best, 0), 0.0);
  const auto props = propose_rois(rpn, 5, rpn_cfg);
  ASSERT_FALSE(props.empty());
  EXPECT_EQ(props[0].anchor, best);
  EXPECT_EQ(best % kNumClasses, 1u);
  for (std::size_t i = 1; i < props.size(); ++i) EXPECT_GE(props[i - 1].score, props[i].score);
}

TEST(NmsTest, SuppressesHeavyOverlapOnly) {
  const std::vector<Box3> boxes = {{0, 0, 0, 2, 2, 1, 0}, {0.1, 0, 0, 2, 2, 1, 0}, {1, 0, 0, 2, 2, 1, 0}};
  EXPECT_EQ(nms_bev(boxes, 0.7, 10), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(nms_bev(boxes, 0.7, 1), (std::vector<std::size_t>{0}));
}

class RoiFixture : public ::testing::Test {
 protected:
  RoiFixture() {
    Rng rng(7);
    backbone.widths = {4, 2, 2, 2, 2};
    init_roi_pool(store, backbone, cfg, rng);
    // Identity projection from the stride-1 block.
    Tensor& w = store.get("roi.proj.w");
    for (auto& v : w.values()) v = 0;
    w.at(0, 0) = 1;
    w.at(1, 1) = 1;
  }
  StageVolumes make_volumes(Tape& tape, const Tensor& stage0) {
    StageVolumes v;
    VoxelGridSpec spec = unit_grid(8, 8, 8);
    for (std::size_t s = 0; s < 4; ++s) {
      v.specs[s] = spec.coarsened(kStageStrides[s]);
      const auto& e = v.specs[s].extents;
      v.features[s] = s == 0 ? tape.constant(stage0) : tape.constant(Tensor(Shape{e[0], e[1], e[2], 2}, 5.0));
    }
    return v;
  }
  BackboneConfig backbone;
  RoiPoolConfig cfg{2, 0.0};
  ParamStore store;
};

TEST_F(RoiFixture, SingleVoxelGivesItsFeature) {
  Tensor stage0(Shape{8, 8, 8, 2});
  const std::size_t v = unit_grid(8, 8, 8).flat_index(3, 4, 5);
  stage0[v * 2] = 0.25;
  stage0[v * 2 + 1] = -1.5;
  Tape tape;
  BoundParams params(tape, store);
  const Box3 box{3.5, 4.5, 5.5, 0.8, 0.8, 0.8, 0.3};
  const Box3 boxes[] = {box};
  const Var out = roi_pool(params, make_volumes(tape, stage0), boxes, cfg);
  EXPECT_EQ(out.shape(), (Shape{1, 2}));
  EXPECT_DOUBLE_EQ(out.value()[0], 0.25);
  EXPECT_DOUBLE_EQ(out.value()[1], -1.5);
}

TEST_F(RoiFixture, TwoVoxelsGiveTheirMean) {
  Tensor stage0(Shape{8, 8, 8, 2});
  const auto spec = unit_grid(8, 8, 8);
  const std::size_t a = spec.flat_index(2, 2, 2), b = spec.flat_index(3, 2, 2);
  stage0[a * 2] = 1.0;
  stage0[b * 2] = 4.0;
  stage0[b * 2 + 1] = 2.0;
  Tape tape;
  BoundParams params(tape, store);
  const Box3 boxes[] = {{3.0, 2.5, 2.5, 1.8, 0.6, 0.6, 0.0}};
  const Var out = roi_pool(params, make_volumes(tape, stage0), boxes, cfg);
  EXPECT_DOUBLE_EQ(out.value()[0], 2.5);
  EXPECT_DOUBLE_EQ(out.value()[1], 1.0);
}

TEST_F(RoiFixture, DisjointBoxGivesEmptyVectors) {
  Tensor& w = store.get("roi.proj.w");
  for (auto& v : w.values()) v = 0;
  for (std::size_t i = 0; i < 8; i += 2) w.at(i, 0) = 1;  // sum of every scale's first channel
  Tape tape;
  BoundParams params(tape, store);
  const Box3 boxes[] = {{50, 50, 50, 1, 1, 1, 0}};
  const Var out = roi_pool(params, make_volumes(tape, Tensor(Shape{8, 8, 8, 2})), boxes, cfg);
  double expected = 0;
  for (std::size_t s = 0; s < 4; ++s) expected += store.get("roi.empty" + std::to_string(s))[0];
  EXPECT_NEAR(out.value()[0], expected, 1e-15);
}

TEST_F(RoiFixture, NoProposalsGivesEmptyMatrix) {
  Tape tape;
  BoundParams params(tape, store);
  const Var out = roi_pool(params, make_volumes(tape, Tensor(Shape{8, 8, 8, 2})), {}, cfg);
  EXPECT_EQ(out.shape(), (Shape{0, 2}));
}

TEST(RoiPoolTest, InvariantToPointOrder) {
  std::mt19937_64 rng(26);
  VoxelGridSpec spec{{0, -10, -1}, {1.25, 1.25, 0.5}, {16, 16, 8}};
  BackboneConfig backbone;
  RoiPoolConfig cfg;
  ParamStore store;
  Rng init(8);
  init_backbone(store, backbone, init);
  init_roi_pool(store, backbone, cfg, init);
  RawPointCloud cloud = random_cloud(rng, 400, 0, 10);
  const std::vector<Box3> boxes = {{5, 2, 1, 4, 2, 1.5, 0.3}, {8, 0, 1, 1, 1, 2, -1.0}};
  const auto run = [&](const RawPointCloud& c) {
    Tape tape;
    BoundParams params(tape, store);
    return roi_pool(params, downsample_stages(params, voxelize(c, spec), backbone), boxes, cfg).value();
  };
  const Tensor first = run(cloud);
  std::shuffle(cloud.begin(), cloud.end(), rng);
  EXPECT_LE(max_abs_diff(first, run(cloud)), 1e-12);
}

TEST(ImageEncoderTest, ShapesAndZeroImage) {
  ImageEncoderConfig cfg;
  ParamStore store;
  Rng rng(9);
  init_image_encoder(store, cfg, rng);
  Tape tape;
  BoundParams params(tape, store);
  const Var out = image_features(params, Tensor(Shape{32, 32, 3}), cfg);
  EXPECT_EQ(out.shape(), (Shape{8, 8, 16}));
  for (double v : out.value().values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(image_features(params, Tensor(Shape{30, 32, 3}), cfg), std::invalid_argument);
}

TEST(ImageEncoderTest, PureFunctionOfEachImage) {
  ImageEncoderConfig cfg;
  ParamStore store;
  Rng rng(10);
  init_image_encoder(store, cfg, rng);
  std::mt19937_64 gen(27);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Tensor> images(3, Tensor(Shape{16, 16, 3}));
  for (auto& im : images)
    for (auto& v : im.values()) v = u(gen);
  const auto encode = [&](const Tensor& im) {
    Tape tape;
    BoundParams params(tape, store);
    return image_features(params, im, cfg).value();
  };
  std::vector<Tensor> forward, reversed;
  for (const auto& im : images) forward.push_back(encode(im));
  for (auto it = images.rbegin(); it != images.rend(); ++it) reversed.push_back(encode(*it));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(forward[i], reversed[2 - i]);
}
