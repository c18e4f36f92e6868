#pragma once

#include <array>
#include <vector>

#include "qicvt/frontend/pointcloud.hpp"
#include "qicvt/tensor/params.hpp"

namespace qicvt {

inline constexpr std::array<std::size_t, 4> kStageStrides{1, 2, 4, 8};

struct BackboneConfig {
  // Input width (4) followed by the output width of each stage.
  std::array<std::size_t, 5> widths{4, 8, 16, 32, 32};
};

// Weights live under "backbone.stage{s}.w" / ".b"; biases start at zero.
void init_backbone(ParamStore& store, const BackboneConfig& cfg, Rng& rng);

struct StageVolumes {
  std::array<Var, 4> features;  // (U/s, V/s, W/s, C_s)
  std::array<VoxelGridSpec, 4> specs;
};

// Occupied voxels: x and y as offsets from the voxel centre in half-voxels,
// z over the grid height in [-1, 1], and 0.5 + g/2 so occupancy is visible
// even at zero reflectance. Empty voxels stay zero.
Tensor normalized_input(const FeatureVolume& base);

// Four dense strided 3x3x3 conv stages (ReLU) at strides 1, 2, 4, 8.
// Throws std::invalid_argument if the extents are not divisible by 8.
StageVolumes downsample_stages(BoundParams& params, const FeatureVolume& base, const BackboneConfig& cfg);

}  // namespace qicvt
