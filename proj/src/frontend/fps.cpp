#include <limits>
#include <stdexcept>

#include "qicvt/frontend/pointcloud.hpp"

namespace qicvt {

std::vector<std::size_t> fps(const RawPointCloud& cloud, std::size_t k, std::size_t seed_index) {
  const std::size_t n = cloud.size();
  if (n == 0 || k == 0) return {};
  if (seed_index >= n) throw std::out_of_range("fps seed index out of range");
  const std::size_t take = std::min(k, n);

  // Squared distances keep the argmax identical and avoid sqrt.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> chosen(n, 0);
  std::vector<std::size_t> out;
  out.reserve(take);
  std::size_t current = seed_index;
  for (;;) {
    out.push_back(current);
    chosen[current] = 1;
    if (out.size() == take) break;
    const Point& c = cloud[current];
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      const double dx = cloud[i].x - c.x, dy = cloud[i].y - c.y, dz = cloud[i].z - c.z;
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < nearest[i]) nearest[i] = d2;
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    current = best;
  }
  return out;
}

}  // namespace qicvt
