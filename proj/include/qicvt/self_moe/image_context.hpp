#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qicvt/frontend/geometry.hpp"
#include "qicvt/tensor/params.hpp"

namespace qicvt {

// Pinhole camera. Camera frame: x right, y down, z forward.
struct Camera {
  double fx = 16, fy = 16;
  double cx = 16, cy = 16;
  std::size_t width = 32, height = 32;
  std::array<double, 3> position{0, 0, 1};
  // World -> camera rotation, row major. Default looks along world +x with
  // world +z up.
  std::array<double, 9> rotation{0, -1, 0, 0, 0, -1, 1, 0, 0};
  double near = 0.1;

  std::array<double, 3> to_camera(double x, double y, double z) const;
  // Pixel (u, v) of a world point, or nullopt when it is not in front of the camera.
  std::optional<std::array<double, 2>> project(double x, double y, double z) const;
};

// Cells of an (rows, cols) feature grid, each `stride` pixels, under the 2D
// convex hull of the box's projected corners. Empty when any corner is behind
// the camera or the hull misses the grid. If the hull covers no cell center,
// the cell holding the mean projected corner is used.
std::vector<std::size_t> context_cells(const Box3& box, const Camera& camera, std::size_t rows, std::size_t cols,
                                       double stride);

void init_image_context(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng);

// Mean feature over each box's context cells from map (rows, cols, C); boxes
// without cells get the learned prefix.empty vector. Returns (P, C).
Var gather_image_context(BoundParams& params, const std::string& prefix, const Var& map, std::span<const Box3> boxes,
                         const Camera& camera);

// Andrew's monotone chain; counter-clockwise, collinear points dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

}  // namespace qicvt
