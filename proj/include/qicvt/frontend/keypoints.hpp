#pragma once

#include <span>

#include "qicvt/frontend/geometry.hpp"
#include "qicvt/frontend/pointcloud.hpp"
#include "qicvt/tensor/tensor.hpp"

namespace qicvt {

inline constexpr std::size_t kKeypointBins = 4;
inline constexpr std::size_t kKeypointDescriptor = 1 + kKeypointBins * kKeypointBins + 6 + 4 + 3;

struct KeypointWindow {
  double margin_lw = 0.75;  // metres added to each side along l and w
  double margin_h = 0.5;
};

// FPS keypoints among the points that fall inside the grid.
RawPointCloud grid_keypoints(const RawPointCloud& cloud, const VoxelGridSpec& grid, std::size_t k);

// Per box, a fixed-length summary of the keypoints inside the enlarged box,
// in the box frame (u along the heading, v across, both scaled to [-1, 1] by
// the window): log count, a 4x4 BEV occupancy histogram (fractions), means
// and second moments of (u, v, z), u/v extents, mean reflectance and the
// reflectance-weighted u/v centroid shift. Zero row when no keypoint is inside.
Tensor keypoint_descriptor(const RawPointCloud& keypoints, std::span<const Box3> boxes, const KeypointWindow& window = {});

}  // namespace qicvt
