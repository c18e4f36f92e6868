#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace qicvt {

inline constexpr double kPi = 3.14159265358979323846;

// Wraps to (-pi, pi].
double wrap_angle(double a);
// Wraps to (-pi/2, pi/2]; used for axis orientation where yaw and yaw + pi coincide.
double wrap_half_angle(double a);

enum class ObjectClass : std::uint8_t { kVehicle = 0, kPedestrian = 1, kCyclist = 2 };
inline constexpr std::size_t kNumClasses = 3;
std::string_view class_name(ObjectClass c);
std::string_view class_short_name(ObjectClass c);

// Oriented box; l runs along the heading, yaw is measured from +x toward +y.
struct Box3 {
  double cx = 0, cy = 0, cz = 0;
  double l = 1, w = 1, h = 1;
  double yaw = 0;

  double volume() const { return l * w * h; }
  double bev_diagonal() const;
  friend bool operator==(const Box3&, const Box3&) = default;
};

struct Detection {
  Box3 box;
  ObjectClass cls = ObjectClass::kVehicle;
  double score = 0;
};

struct Vec2 {
  double x = 0, y = 0;
};

// Counter-clockwise BEV footprint.
std::array<Vec2, 4> bev_corners(const Box3& b);
// Bottom four (counter-clockwise) then top four.
std::array<std::array<double, 3>, 8> corners_3d(const Box3& b);

// Closed containment in the box frame.
bool box_contains(const Box3& b, double x, double y, double z);
Box3 enlarged(const Box3& b, double dl, double dw, double dh);

double polygon_area(std::span<const Vec2> poly);
// Sutherland-Hodgman clip of `subject` against convex counter-clockwise `clip`.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

// Areas below this are treated as no overlap.
inline constexpr double kAreaEps = 1e-12;
double bev_intersection_area(const Box3& a, const Box3& b);
double bev_iou(const Box3& a, const Box3& b);

}  // namespace qicvt
