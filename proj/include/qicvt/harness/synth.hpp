#pragma once

#include <filesystem>
#include <vector>

#include "qicvt/harness/config.hpp"
#include "qicvt/harness/scene_io.hpp"
#include "qicvt/tensor/params.hpp"

namespace qicvt {

struct PlacedObject {
  Box3 box;
  ObjectClass cls;
};

// LiDAR origin; the camera sits at the same point.
inline constexpr std::array<double, 3> kSensorOrigin{0, 0, 1};

// 1..max objects, at most one per 5 m cell, centres jittered within the cell.
std::vector<PlacedObject> sample_layout(const ExperimentConfig& cfg, Rng& rng);

// Mean number of surface points sampled on a box: density x visible area x
// min(4, (reference_range / range)^2).
double expected_surface_points(const Box3& box, const DataConfig& data);

// Points on the visible faces of every object plus ground clutter, a painted
// image of the same layout, and GT boxes with exact interior counts. All
// values are rounded to f32 first so the counts survive a file round trip.
SyntheticScene render_scene(const std::vector<PlacedObject>& objects, const ExperimentConfig& cfg, Rng& rng);
SyntheticScene generate_scene(const ExperimentConfig& cfg, Rng& rng);

// Rng for scene `index` of a split; independent of generation order.
Rng scene_rng(std::uint64_t seed, const std::string& split, std::size_t index);

// Writes DIR/train, DIR/val and DIR/config.txt. Byte-identical for a given (config, seed).
void generate_dataset(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);

}  // namespace qicvt
