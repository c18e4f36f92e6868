#include <algorithm>
#include <cmath>

#include "qicvt/metrics/metrics.hpp"

namespace qicvt {

double iou_3d(const Box3& a, const Box3& b) {
  const double bev = bev_intersection_area(a, b);
  if (bev == 0.0) return 0.0;
  const double top = std::min(a.cz + a.h / 2, b.cz + b.h / 2);
  const double bottom = std::max(a.cz - a.h / 2, b.cz - b.h / 2);
  const double inter = bev * std::max(0.0, top - bottom);
  if (inter <= 0.0) return 0.0;
  return std::clamp(inter / (a.volume() + b.volume() - inter), 0.0, 1.0);
}

double heading_weight(double yaw_det, double yaw_gt) {
  return std::clamp(1.0 - std::abs(wrap_angle(yaw_det - yaw_gt)) / kPi, 0.0, 1.0);
}

}  // namespace qicvt
