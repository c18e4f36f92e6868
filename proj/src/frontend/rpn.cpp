#include "qicvt/frontend/rpn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

namespace {

constexpr double kMaxLogScale = 3.0;

std::size_t cell_features(const BackboneConfig& backbone, const VoxelGridSpec& grid) {
  return grid.coarsened(4).extents[2] * backbone.widths[3];
}

}  // namespace

std::vector<Box3> make_anchors(const VoxelGridSpec& s4, const RpnConfig& cfg) {
  std::vector<Box3> out;
  out.reserve(s4.extents[0] * s4.extents[1] * kNumClasses);
  for (std::size_t i = 0; i < s4.extents[0]; ++i) {
    for (std::size_t j = 0; j < s4.extents[1]; ++j) {
      const auto c = s4.voxel_center(i, j, 0);
      for (const auto& size : cfg.anchor_sizes) {
        out.push_back({c[0], c[1], cfg.ground_z + size[2] / 2, size[0], size[1], size[2], 0.0});
      }
    }
  }
  return out;
}

std::array<double, 8> encode_box(const Box3& a, const Box3& t) {
  const double diag = a.bev_diagonal();
  return {(t.cx - a.cx) / diag, (t.cy - a.cy) / diag, (t.cz - a.cz) / a.h, std::log(t.l / a.l),
          std::log(t.w / a.w),  std::log(t.h / a.h),  std::sin(2 * t.yaw),  std::cos(2 * t.yaw)};
}

Box3 decode_box(const Box3& a, std::span<const double> d) {
  const double diag = a.bev_diagonal();
  const auto scaled = [](double base, double delta) {
    return base * std::exp(std::clamp(delta, -kMaxLogScale, kMaxLogScale));
  };
  Box3 b;
  b.cx = a.cx + d[0] * diag;
  b.cy = a.cy + d[1] * diag;
  b.cz = a.cz + d[2] * a.h;
  b.l = scaled(a.l, d[3]);
  b.w = scaled(a.w, d[4]);
  b.h = scaled(a.h, d[5]);
  b.yaw = wrap_half_angle(std::atan2(d[6], d[7]) / 2);
  return b;
}

void init_rpn(ParamStore& store, const BackboneConfig& backbone, const VoxelGridSpec& grid, const RpnConfig& cfg,
              Rng& rng) {
  const std::size_t in = cell_features(backbone, grid);
  store.add("rpn.fc1.w", glorot(rng, in, cfg.hidden));
  store.add("rpn.fc1.b", Tensor(Shape{cfg.hidden}));
  store.add("rpn.fc2.w", normal_tensor(rng, {cfg.hidden, kNumClasses * kRpnOutputs}, 0.01));
  // Objectness starts near the rare-positive prior so focal loss is stable early.
  Tensor bias(Shape{kNumClasses * kRpnOutputs});
  for (std::size_t a = 0; a < kNumClasses; ++a) bias[a * kRpnOutputs] = -std::log(99.0);
  store.add("rpn.fc2.b", std::move(bias));
}

RpnOutput rpn_forward(BoundParams& params, const StageVolumes& volumes, const RpnConfig& cfg) {
  const Var& v4 = volumes.features[2];
  const Shape& s = v4.shape();
  const std::size_t cells = s[0] * s[1];
  const Var bev = reshape(v4, {cells, s[2] * s[3]});
  const Var hidden = relu(add(matmul(bev, params["rpn.fc1.w"]), params["rpn.fc1.b"]));
  const Var out = add(matmul(hidden, params["rpn.fc2.w"]), params["rpn.fc2.b"]);
  return {reshape(out, {cells * kNumClasses, kRpnOutputs}), make_anchors(volumes.specs[2], cfg)};
}

std::vector<std::size_t> nms_bev(std::span<const Box3> boxes, double iou_threshold, std::size_t max_keep) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < boxes.size() && kept.size() < max_keep; ++i) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (bev_iou(boxes[i], boxes[k]) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::vector<Proposal> propose_rois(const RpnOutput& rpn, std::size_t max_proposals, const RpnConfig& cfg) {
  const Tensor& raw = rpn.raw.value();
  const std::size_t n = rpn.anchors.size();
  std::vector<Proposal> all(n);
  for (std::size_t a = 0; a < n; ++a) {
    const double* row = raw.data() + a * kRpnOutputs;
    all[a].box = decode_box(rpn.anchors[a], std::span<const double>(row + 1, 8));
    all[a].score = scalar::sigmoid(row[0]);
    all[a].anchor = a;
    all[a].anchor_class = static_cast<ObjectClass>(a % kNumClasses);
  }
  std::stable_sort(all.begin(), all.end(), [](const Proposal& x, const Proposal& y) { return x.score > y.score; });
  std::vector<Box3> boxes;
  boxes.reserve(n);
  for (const Proposal& p : all) boxes.push_back(p.box);
  std::vector<Proposal> out;
  for (std::size_t k : nms_bev(boxes, cfg.nms_iou, max_proposals)) out.push_back(all[k]);
  return out;
}

}  // namespace qicvt
