#include "qicvt/frontend/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace qicvt {

double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

double wrap_half_angle(double a) {
  if (a > -kPi / 2 && a <= kPi / 2) return a;
  double r = std::fmod(a + kPi / 2.0, kPi);
  if (r <= 0.0) r += kPi;
  return r - kPi / 2.0;
}

std::string_view class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::kVehicle: return "vehicle";
    case ObjectClass::kPedestrian: return "pedestrian";
    case ObjectClass::kCyclist: return "cyclist";
  }
  return "unknown";
}

std::string_view class_short_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::kVehicle: return "VEH";
    case ObjectClass::kPedestrian: return "PED";
    case ObjectClass::kCyclist: return "CYC";
  }
  return "???";
}

double Box3::bev_diagonal() const { return std::sqrt(l * l + w * w); }

std::array<Vec2, 4> bev_corners(const Box3& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = b.l / 2, hw = b.w / 2;
  const double local[4][2] = {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {b.cx + c * local[i][0] - s * local[i][1], b.cy + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

std::array<std::array<double, 3>, 8> corners_3d(const Box3& b) {
  const auto bev = bev_corners(b);
  std::array<std::array<double, 3>, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {bev[i].x, bev[i].y, b.cz - b.h / 2};
    out[i + 4] = {bev[i].x, bev[i].y, b.cz + b.h / 2};
  }
  return out;
}

bool box_contains(const Box3& b, double x, double y, double z) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double dx = x - b.cx, dy = y - b.cy;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= b.l / 2 && std::abs(ly) <= b.w / 2 && std::abs(z - b.cz) <= b.h / 2;
}

Box3 enlarged(const Box3& b, double dl, double dw, double dh) {
  Box3 out = b;
  out.l += dl;
  out.w += dw;
  out.h += dh;
  return out;
}

double polygon_area(std::span<const Vec2> poly) {
  double twice = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return std::abs(twice) / 2;
}

namespace {

double side(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

Vec2 intersect(const Vec2& p, const Vec2& q, double sp, double sq) {
  const double t = sp / (sp - sq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    std::vector<Vec2> next;
    next.reserve(out.size() + 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Vec2& p = out[i];
      const Vec2& q = out[(i + 1) % out.size()];
      const double sp = side(a, b, p), sq = side(a, b, q);
      if (sp >= 0) next.push_back(p);
      if ((sp >= 0) != (sq >= 0)) next.push_back(intersect(p, q, sp, sq));
    }
    out = std::move(next);
  }
  return out;
}

double bev_intersection_area(const Box3& a, const Box3& b) {
  const auto pa = bev_corners(a);
  const auto pb = bev_corners(b);
  const auto poly = clip_convex(pa, pb);
  if (poly.size() < 3) return 0.0;
  const double area = polygon_area(poly);
  return area < kAreaEps ? 0.0 : area;
}

double bev_iou(const Box3& a, const Box3& b) {
  const double inter = bev_intersection_area(a, b);
  const double uni = a.l * a.w + b.l * b.w - inter;
  return uni <= 0 ? 0.0 : std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace qicvt
