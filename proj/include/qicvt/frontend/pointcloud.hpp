#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qicvt/tensor/tensor.hpp"

namespace qicvt {

struct Point {
  double x = 0, y = 0, z = 0;
  double g = 0;  // reflectance in [0, 1]
  friend bool operator==(const Point&, const Point&) = default;
};

using RawPointCloud = std::vector<Point>;

// Throws std::invalid_argument on non-finite coordinates or reflectance outside [0, 1].
void validate_cloud(const RawPointCloud& cloud);

struct VoxelGridSpec {
  std::array<double, 3> origin{0, 0, 0};
  std::array<double, 3> voxel_size{1, 1, 1};
  std::array<std::size_t, 3> extents{8, 8, 8};

  void validate() const;
  std::size_t voxel_count() const { return extents[0] * extents[1] * extents[2]; }
  std::size_t flat_index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * extents[1] + j) * extents[2] + k;
  }
  std::array<double, 3> voxel_center(std::size_t i, std::size_t j, std::size_t k) const;
  std::array<double, 3> upper_corner() const;
  // Flat index of the half-open voxel holding the point, if inside the grid.
  std::optional<std::size_t> locate(double x, double y, double z) const;
  // Same region at `stride` times coarser resolution; extents must divide.
  VoxelGridSpec coarsened(std::size_t stride) const;

  friend bool operator==(const VoxelGridSpec&, const VoxelGridSpec&) = default;
};

struct FeatureVolume {
  VoxelGridSpec spec;
  Tensor data;                         // (U, V, W, C)
  std::vector<std::uint8_t> occupancy;  // one flag per voxel
  std::size_t channels() const { return data.dim(3); }
};

struct VoxelizeStats {
  std::size_t in_bounds = 0;
  std::size_t dropped = 0;
  std::vector<std::uint32_t> counts;  // points per voxel
};

// Per-voxel mean of (x, y, z, g). Points outside the grid are dropped and
// counted in `stats` when given.
FeatureVolume voxelize(const RawPointCloud& cloud, const VoxelGridSpec& spec, VoxelizeStats* stats = nullptr);

// Greedy farthest point sampling on Euclidean xyz, starting from seed_index;
// ties go to the lowest index. Returns min(k, N) unique indices in selection order.
std::vector<std::size_t> fps(const RawPointCloud& cloud, std::size_t k, std::size_t seed_index = 0);

}  // namespace qicvt
