#pragma once

#include <vector>

#include "qicvt/frontend/pointcloud.hpp"

namespace qicvt::oracle {

// Exhaustive max-min selection: every step recomputes each candidate's
// distance to every selected point from scratch. O(K^2 N).
std::vector<std::size_t> fps_bruteforce(const RawPointCloud& cloud, std::size_t k, std::size_t seed_index);

}  // namespace qicvt::oracle
