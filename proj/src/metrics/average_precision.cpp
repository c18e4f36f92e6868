#include <algorithm>

#include "qicvt/metrics/metrics.hpp"

namespace qicvt {

double average_precision(std::vector<RankedMatch> matches, std::size_t n_gt, bool weighted) {
  if (n_gt == 0) return matches.empty() ? 1.0 : 0.0;
  std::stable_sort(matches.begin(), matches.end(),
                   [](const RankedMatch& a, const RankedMatch& b) { return a.score > b.score; });
  std::vector<double> recall, precision;
  recall.reserve(matches.size());
  precision.reserve(matches.size());
  double tp_mass = 0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (matches[i].tp) {
      ++tp;
      tp_mass += weighted ? matches[i].heading : 1.0;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    precision.push_back(tp_mass / static_cast<double>(i + 1));
  }
  // Envelope: best precision at any recall at or beyond each point.
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double total = 0;
  std::size_t cursor = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    while (cursor < recall.size() && recall[cursor] < r - 1e-12) ++cursor;
    if (cursor < recall.size()) total += precision[cursor];
  }
  return total / 101.0;
}

}  // namespace qicvt
