#include "qicvt/oracles/iou_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qicvt::oracle {

namespace {

struct P {
  double x, y;
};

std::array<P, 4> rect(const Box3& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  std::array<P, 4> out{};
  const double sl[4] = {1, -1, -1, 1};
  const double sw[4] = {1, 1, -1, -1};
  for (int i = 0; i < 4; ++i) {
    const double u = sl[i] * b.l / 2, v = sw[i] * b.w / 2;
    out[i] = {b.cx + u * c - v * s, b.cy + u * s + v * c};
  }
  return out;
}

bool inside(const Box3& b, P p) {
  const double dx = p.x - b.cx, dy = p.y - b.cy;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double u = dx * c + dy * s, v = -dx * s + dy * c;
  const double tol = 1e-12;
  return std::abs(u) <= b.l / 2 + tol && std::abs(v) <= b.w / 2 + tol;
}

double cross(P o, P a, P b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

double hull_area(std::vector<P> pts) {
  if (pts.size() < 3) return 0;
  std::sort(pts.begin(), pts.end(), [](P a, P b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<P> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  double a = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const P& p = h[i];
    const P& q = h[(i + 1) % h.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2;
}

}  // namespace

double bev_overlap_area(const Box3& a, const Box3& b) {
  const auto ra = rect(a), rb = rect(b);
  std::vector<P> pts;
  for (P p : ra) if (inside(b, p)) pts.push_back(p);
  for (P p : rb) if (inside(a, p)) pts.push_back(p);
  for (int i = 0; i < 4; ++i) {
    const P p1 = ra[i], p2 = ra[(i + 1) % 4];
    for (int j = 0; j < 4; ++j) {
      const P q1 = rb[j], q2 = rb[(j + 1) % 4];
      const double d = (p2.x - p1.x) * (q2.y - q1.y) - (p2.y - p1.y) * (q2.x - q1.x);
      if (std::abs(d) < 1e-15) continue;
      const double t = ((q1.x - p1.x) * (q2.y - q1.y) - (q1.y - p1.y) * (q2.x - q1.x)) / d;
      const double u = ((q1.x - p1.x) * (p2.y - p1.y) - (q1.y - p1.y) * (p2.x - p1.x)) / d;
      if (t >= 0 && t <= 1 && u >= 0 && u <= 1) pts.push_back({p1.x + t * (p2.x - p1.x), p1.y + t * (p2.y - p1.y)});
    }
  }
  return hull_area(std::move(pts));
}

double iou_3d(const Box3& a, const Box3& b) {
  const double zo = std::min(a.cz + a.h / 2, b.cz + b.h / 2) - std::max(a.cz - a.h / 2, b.cz - b.h / 2);
  if (zo <= 0) return 0;
  const double inter = bev_overlap_area(a, b) * zo;
  if (inter <= 1e-12) return 0;
  return inter / (a.l * a.w * a.h + b.l * b.w * b.h - inter);
}

}  // namespace qicvt::oracle
