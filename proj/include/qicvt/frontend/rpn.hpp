#pragma once

#include <array>
#include <span>
#include <vector>

#include "qicvt/frontend/backbone.hpp"
#include "qicvt/frontend/geometry.hpp"

namespace qicvt {

inline constexpr std::size_t kRpnOutputs = 9;  // objectness, dx, dy, dz, dl, dw, dh, sin2t, cos2t

struct RpnConfig {
  std::size_t hidden = 32;
  double ground_z = 0.0;
  double nms_iou = 0.7;
  // (l, w, h) per class.
  std::array<std::array<double, 3>, kNumClasses> anchor_sizes{{{4.5, 1.9, 1.6}, {0.8, 0.8, 1.8}, {1.8, 0.7, 1.7}}};
};

struct Proposal {
  Box3 box;
  double score = 0;  // objectness in [0, 1]
  std::size_t anchor = 0;
  ObjectClass anchor_class = ObjectClass::kVehicle;
};

// Axis-aligned anchors, one per class per BEV cell of the stride-4 volume.
// Anchor index = cell * kNumClasses + class.
std::vector<Box3> make_anchors(const VoxelGridSpec& stride4_spec, const RpnConfig& cfg);

// Anchor-relative residuals; the yaw pair encodes the axis (2 * yaw) so a box
// and its 180-degree flip share a target.
std::array<double, 8> encode_box(const Box3& anchor, const Box3& target);
Box3 decode_box(const Box3& anchor, std::span<const double> deltas);

void init_rpn(ParamStore& store, const BackboneConfig& backbone, const VoxelGridSpec& grid, const RpnConfig& cfg,
              Rng& rng);

struct RpnOutput {
  Var raw;  // (anchors, kRpnOutputs)
  std::vector<Box3> anchors;
};

// Collapses the stride-4 volume to BEV cells and scores every anchor.
RpnOutput rpn_forward(BoundParams& params, const StageVolumes& volumes, const RpnConfig& cfg);

// Decodes, sorts by objectness (stable), applies greedy BEV NMS and keeps at
// most max_proposals.
std::vector<Proposal> propose_rois(const RpnOutput& rpn, std::size_t max_proposals, const RpnConfig& cfg);

// Greedy NMS over boxes already in priority order; returns kept positions.
std::vector<std::size_t> nms_bev(std::span<const Box3> boxes, double iou_threshold, std::size_t max_keep);

}  // namespace qicvt
