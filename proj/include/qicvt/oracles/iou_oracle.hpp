#pragma once

#include "qicvt/frontend/geometry.hpp"

namespace qicvt::oracle {

// Overlap region built from corners of each rectangle lying inside the other
// plus all pairwise edge crossings, then convex hull area. No clipping.
double bev_overlap_area(const Box3& a, const Box3& b);
double iou_3d(const Box3& a, const Box3& b);

}  // namespace qicvt::oracle
