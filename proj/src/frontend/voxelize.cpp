#include <cmath>
#include <stdexcept>
#include <string>

#include "qicvt/frontend/pointcloud.hpp"

namespace qicvt {

void validate_cloud(const RawPointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || !std::isfinite(p.g)) {
      throw std::invalid_argument("point " + std::to_string(i) + " is not finite");
    }
    if (p.g < 0.0 || p.g > 1.0) {
      throw std::invalid_argument("point " + std::to_string(i) + " reflectance outside [0, 1]");
    }
  }
}

void VoxelGridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(voxel_size[a] > 0.0) || !std::isfinite(voxel_size[a])) {
      throw std::invalid_argument("voxel size must be positive and finite");
    }
    if (!std::isfinite(origin[a])) throw std::invalid_argument("grid origin must be finite");
    if (extents[a] == 0) throw std::invalid_argument("grid extents must be >= 1");
  }
}

std::array<double, 3> VoxelGridSpec::voxel_center(std::size_t i, std::size_t j, std::size_t k) const {
  return {origin[0] + (static_cast<double>(i) + 0.5) * voxel_size[0],
          origin[1] + (static_cast<double>(j) + 0.5) * voxel_size[1],
          origin[2] + (static_cast<double>(k) + 0.5) * voxel_size[2]};
}

std::array<double, 3> VoxelGridSpec::upper_corner() const {
  std::array<double, 3> out;
  for (int a = 0; a < 3; ++a) out[a] = origin[a] + static_cast<double>(extents[a]) * voxel_size[a];
  return out;
}

std::optional<std::size_t> VoxelGridSpec::locate(double x, double y, double z) const {
  const double p[3] = {x, y, z};
  std::size_t idx[3];
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - origin[a]) / voxel_size[a]);
    if (!(f >= 0.0) || f >= static_cast<double>(extents[a])) return std::nullopt;
    idx[a] = static_cast<std::size_t>(f);
  }
  return flat_index(idx[0], idx[1], idx[2]);
}

VoxelGridSpec VoxelGridSpec::coarsened(std::size_t stride) const {
  VoxelGridSpec out = *this;
  for (int a = 0; a < 3; ++a) {
    if (stride == 0 || extents[a] % stride != 0) {
      throw std::invalid_argument("grid extent " + std::to_string(extents[a]) + " not divisible by stride " +
                                  std::to_string(stride));
    }
    out.extents[a] = extents[a] / stride;
    out.voxel_size[a] = voxel_size[a] * static_cast<double>(stride);
  }
  return out;
}

FeatureVolume voxelize(const RawPointCloud& cloud, const VoxelGridSpec& spec, VoxelizeStats* stats) {
  spec.validate();
  const std::size_t n_vox = spec.voxel_count();
  FeatureVolume vol{spec, Tensor(Shape{spec.extents[0], spec.extents[1], spec.extents[2], 4}),
                    std::vector<std::uint8_t>(n_vox, 0)};
  std::vector<std::uint32_t> counts(n_vox, 0);
  std::size_t dropped = 0;
  double* d = vol.data.data();
  for (const Point& p : cloud) {
    const auto cell = spec.locate(p.x, p.y, p.z);
    if (!cell) {
      ++dropped;
      continue;
    }
    double* f = d + *cell * 4;
    f[0] += p.x;
    f[1] += p.y;
    f[2] += p.z;
    f[3] += p.g;
    ++counts[*cell];
  }
  for (std::size_t v = 0; v < n_vox; ++v) {
    if (counts[v] == 0) continue;
    vol.occupancy[v] = 1;
    for (int c = 0; c < 4; ++c) d[v * 4 + c] /= static_cast<double>(counts[v]);
  }
  if (stats) {
    stats->in_bounds = cloud.size() - dropped;
    stats->dropped = dropped;
    stats->counts = std::move(counts);
  }
  return vol;
}

}  // namespace qicvt
