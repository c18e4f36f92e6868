#include "qicvt/oracles/fps_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace qicvt::oracle {

std::vector<std::size_t> fps_bruteforce(const RawPointCloud& cloud, std::size_t k, std::size_t seed_index) {
  const std::size_t n = cloud.size();
  std::vector<std::size_t> selected;
  if (n == 0 || k == 0) return selected;
  selected.push_back(seed_index);
  while (selected.size() < std::min(k, n)) {
    long best = -1;
    double best_score = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(selected.begin(), selected.end(), i) != selected.end()) continue;
      double score = INFINITY;
      for (std::size_t s : selected) {
        score = std::min(score, std::hypot(cloud[i].x - cloud[s].x, cloud[i].y - cloud[s].y, cloud[i].z - cloud[s].z));
      }
      if (score > best_score) {
        best_score = score;
        best = static_cast<long>(i);
      }
    }
    selected.push_back(static_cast<std::size_t>(best));
  }
  return selected;
}

}  // namespace qicvt::oracle
