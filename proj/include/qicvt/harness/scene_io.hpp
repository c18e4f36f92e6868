#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "qicvt/frontend/pointcloud.hpp"
#include "qicvt/metrics/metrics.hpp"
#include "qicvt/tensor/tensor.hpp"

namespace qicvt {

// One synthetic frame. The camera is not stored; it follows from the
// experiment config (synthetic frames are generated already aligned).
struct SyntheticScene {
  RawPointCloud cloud;
  Tensor image;  // (H, W, 3) in [0, 1]
  std::vector<GroundTruthBox> gts;
};

// Binary little-endian: "QICV", version, points as 4 x f32, image tensor (f32),
// then per box 7 x f32, u8 class, u32 interior points. Throws FormatError.
void write_scene(std::ostream& os, const SyntheticScene& scene);
SyntheticScene read_scene(std::istream& is);
void save_scene(const std::filesystem::path& path, const SyntheticScene& scene);
SyntheticScene load_scene(const std::filesystem::path& path);

// Scenes of DIR/<split>/scene_NNNN.qicv in index order.
std::vector<SyntheticScene> load_split(const std::filesystem::path& dir, const std::string& split);
std::filesystem::path scene_path(const std::filesystem::path& dir, const std::string& split, std::size_t index);

}  // namespace qicvt
