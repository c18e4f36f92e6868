#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "qicvt/metrics/metrics.hpp"

namespace qicvt {

Difficulty difficulty_of(std::uint32_t points) {
  if (points >= kLevel1MinPoints) return Difficulty::kLevel1;
  return points > 0 ? Difficulty::kLevel2 : Difficulty::kExcluded;
}

std::vector<Difficulty> difficulty_split(std::span<const GroundTruthBox> gts) {
  std::vector<Difficulty> out;
  out.reserve(gts.size());
  for (const auto& g : gts) out.push_back(difficulty_of(g.points));
  return out;
}

bool evaluated_at(Difficulty d, Difficulty level) {
  if (d == Difficulty::kExcluded) return false;
  return level == Difficulty::kLevel2 || d == Difficulty::kLevel1;
}

std::vector<Match> match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                                    double iou_threshold, const std::vector<bool>& gt_evaluated) {
  if (!gt_evaluated.empty() && gt_evaluated.size() != gts.size()) {
    throw std::invalid_argument("gt_evaluated must have one flag per ground truth");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<bool> taken(gts.size(), false);
  std::vector<Match> out;
  out.reserve(dets.size());
  for (std::size_t d : order) {
    // Best unmatched GT among evaluated (pass 0) then ignored (pass 1) ones.
    Match m{d, MatchKind::kFalsePositive, 0, 0, 0};
    for (int pass = 0; pass < 2 && m.kind == MatchKind::kFalsePositive; ++pass) {
      double best = -1;
      std::size_t best_gt = gts.size();
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const bool evaluated = gt_evaluated.empty() || gt_evaluated[g];
        if (taken[g] || evaluated != (pass == 0) || gts[g].cls != dets[d].cls) continue;
        const double iou = iou_3d(dets[d].box, gts[g].box);
        if (iou >= iou_threshold && iou > best) best = iou, best_gt = g;
      }
      if (best_gt == gts.size()) continue;
      taken[best_gt] = true;
      m.gt = best_gt;
      m.iou = best;
      if (pass == 0) {
        m.kind = MatchKind::kTruePositive;
        m.heading = heading_weight(dets[d].box.yaw, gts[best_gt].box.yaw);
      } else {
        m.kind = MatchKind::kIgnored;
      }
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace qicvt
