#pragma once

#include <span>
#include <vector>

#include "qicvt/frontend/backbone.hpp"
#include "qicvt/frontend/geometry.hpp"

namespace qicvt {

struct RoiPoolConfig {
  std::size_t out_channels = 32;  // C_L
  // Box enlargement per side, in voxels of the scale being pooled.
  double margin = 0.5;
};

void init_roi_pool(ParamStore& store, const BackboneConfig& backbone, const RoiPoolConfig& cfg, Rng& rng);

// Voxels (flat indices) of `spec` whose centers fall inside `box` enlarged by
// `margin` voxels per side.
std::vector<std::size_t> voxels_in_box(const VoxelGridSpec& spec, const Box3& box, double margin);

// Per scale: mean of the voxel features inside each box, or the scale's
// learned empty vector when there are none. Scales are concatenated and
// projected to (P, C_L).
Var roi_pool(BoundParams& params, const StageVolumes& volumes, std::span<const Box3> boxes, const RoiPoolConfig& cfg);

}  // namespace qicvt
