#include "qicvt/frontend/keypoints.hpp"

#include <algorithm>
#include <cmath>

namespace qicvt {

RawPointCloud grid_keypoints(const RawPointCloud& cloud, const VoxelGridSpec& grid, std::size_t k) {
  RawPointCloud in_grid;
  for (const Point& p : cloud) {
    if (grid.locate(p.x, p.y, p.z)) in_grid.push_back(p);
  }
  RawPointCloud out;
  for (std::size_t i : fps(in_grid, k)) out.push_back(in_grid[i]);
  return out;
}

Tensor keypoint_descriptor(const RawPointCloud& keypoints, std::span<const Box3> boxes, const KeypointWindow& window) {
  constexpr std::size_t B = kKeypointBins;
  Tensor out(Shape{boxes.size(), kKeypointDescriptor});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box3& b = boxes[i];
    const double hu = b.l / 2 + window.margin_lw, hv = b.w / 2 + window.margin_lw, hz = b.h / 2 + window.margin_h;
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    std::vector<std::array<double, 4>> local;
    for (const Point& p : keypoints) {
      const double dx = p.x - b.cx, dy = p.y - b.cy;
      const double u = (c * dx + s * dy) / hu, v = (-s * dx + c * dy) / hv, z = (p.z - b.cz) / hz;
      if (std::abs(u) <= 1 && std::abs(v) <= 1 && std::abs(z) <= 1) local.push_back({u, v, z, p.g});
    }
    if (local.empty()) continue;
    double* row = out.data() + i * kKeypointDescriptor;
    const double n = static_cast<double>(local.size());
    std::size_t col = 0;
    row[col++] = std::log1p(n) / 4;
    for (const auto& q : local) {
      const auto bu = std::min<std::size_t>(B - 1, static_cast<std::size_t>((q[0] + 1) / 2 * B));
      const auto bv = std::min<std::size_t>(B - 1, static_cast<std::size_t>((q[1] + 1) / 2 * B));
      row[col + bu * B + bv] += 1 / n;
    }
    col += B * B;
    double m[4] = {0, 0, 0, 0};
    for (const auto& q : local)
      for (int a = 0; a < 4; ++a) m[a] += q[a] / n;
    double uu = 0, vv = 0, uv = 0, gu = 0, gv = 0;
    double lo_u = 1, hi_u = -1, lo_v = 1, hi_v = -1;
    for (const auto& q : local) {
      const double du = q[0] - m[0], dv = q[1] - m[1];
      uu += du * du / n;
      vv += dv * dv / n;
      uv += du * dv / n;
      gu += (q[3] - m[3]) * du / n;
      gv += (q[3] - m[3]) * dv / n;
      lo_u = std::min(lo_u, q[0]);
      hi_u = std::max(hi_u, q[0]);
      lo_v = std::min(lo_v, q[1]);
      hi_v = std::max(hi_v, q[1]);
    }
    for (double v : {m[0], m[1], m[2], uu, vv, uv, lo_u, hi_u, lo_v, hi_v, m[3], 4 * gu, 4 * gv}) row[col++] = v;
  }
  return out;
}

}  // namespace qicvt
