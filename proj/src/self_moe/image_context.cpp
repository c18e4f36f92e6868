#include "qicvt/self_moe/image_context.hpp"

#include <algorithm>
#include <cmath>

#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

std::array<double, 3> Camera::to_camera(double x, double y, double z) const {
  const double d[3] = {x - position[0], y - position[1], z - position[2]};
  std::array<double, 3> out{};
  for (int r = 0; r < 3; ++r) out[r] = rotation[r * 3] * d[0] + rotation[r * 3 + 1] * d[1] + rotation[r * 3 + 2] * d[2];
  return out;
}

std::optional<std::array<double, 2>> Camera::project(double x, double y, double z) const {
  const auto c = to_camera(x, y, z);
  if (c[2] <= near) return std::nullopt;
  return std::array<double, 2>{fx * c[0] / c[2] + cx, fy * c[1] / c[2] + cy};
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool inside_convex(std::span<const Vec2> hull, const Vec2& p) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    if (cross(hull[i], hull[(i + 1) % hull.size()], p) < -1e-12) return false;
  }
  return true;
}

}  // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<std::size_t> context_cells(const Box3& box, const Camera& camera, std::size_t rows, std::size_t cols,
                                       double stride) {
  std::vector<Vec2> pts;
  Vec2 mean;
  for (const auto& c : corners_3d(box)) {
    const auto uv = camera.project(c[0], c[1], c[2]);
    if (!uv) return {};
    pts.push_back({(*uv)[0] / stride, (*uv)[1] / stride});  // grid units: x = column, y = row
    mean.x += pts.back().x / 8;
    mean.y += pts.back().y / 8;
  }
  const auto hull = convex_hull(pts);
  double lo_x = pts[0].x, hi_x = pts[0].x, lo_y = pts[0].y, hi_y = pts[0].y;
  for (const Vec2& p : pts) {
    lo_x = std::min(lo_x, p.x), hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y), hi_y = std::max(hi_y, p.y);
  }
  std::vector<std::size_t> out;
  const auto clamp_index = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n) - 1));
  };
  if (hi_x >= 0 && lo_x < static_cast<double>(cols) && hi_y >= 0 && lo_y < static_cast<double>(rows)) {
    for (std::size_t r = clamp_index(std::floor(lo_y), rows); r <= clamp_index(std::floor(hi_y), rows); ++r) {
      for (std::size_t c = clamp_index(std::floor(lo_x), cols); c <= clamp_index(std::floor(hi_x), cols); ++c) {
        if (inside_convex(hull, {static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5})) {
          out.push_back(r * cols + c);
        }
      }
    }
  }
  if (out.empty() && mean.x >= 0 && mean.x < static_cast<double>(cols) && mean.y >= 0 &&
      mean.y < static_cast<double>(rows)) {
    out.push_back(static_cast<std::size_t>(mean.y) * cols + static_cast<std::size_t>(mean.x));
  }
  return out;
}

void init_image_context(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng) {
  store.add(prefix + ".empty", normal_tensor(rng, {1, channels}, 0.1));
}

Var gather_image_context(BoundParams& params, const std::string& prefix, const Var& map, std::span<const Box3> boxes,
                         const Camera& camera) {
  const Shape s = map.shape();
  if (s.size() != 3) throw ShapeError("image context map must be (rows, cols, C)");
  const double stride = static_cast<double>(camera.height) / static_cast<double>(s[0]);
  const Var tokens = reshape(map, {s[0] * s[1], s[2]});
  std::vector<RowPool> pools(boxes.size());
  Tensor empty(Shape{boxes.size(), 1});
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const auto cells = context_cells(boxes[b], camera, s[0], s[1], stride);
    if (cells.empty()) {
      empty[b] = 1.0;
      continue;
    }
    for (std::size_t c : cells) pools[b].push_back({c, 1.0 / static_cast<double>(cells.size())});
  }
  const Var pooled = pool_rows(tokens, std::move(pools));
  return add(pooled, matmul(constant_like(map, std::move(empty)), params[prefix + ".empty"]));
}

}  // namespace qicvt
