#pragma once

#include <array>
#include <vector>

#include "qicvt/metrics/metrics.hpp"

namespace qicvt::oracle {

struct BruteReport {
  // [class][0 = L1, 1 = L2]
  std::array<std::array<double, 2>, kNumClasses> ap{}, aph{};
  double maph_l2 = 0;
};

// Greedy simulation over a precomputed IoU matrix, then AP at each of the 101
// recall levels as the max precision over every ranking prefix that reaches it.
BruteReport evaluate_bruteforce(const std::vector<std::vector<Detection>>& dets,
                                const std::vector<std::vector<GroundTruthBox>>& gts,
                                const std::array<double, kNumClasses>& thresholds);

}  // namespace qicvt::oracle

#include <random>

namespace qicvt::oracle {

struct EvalFixture {
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<GroundTruthBox>> gts;
};

// A few scenes with up to max_gts GTs total and max_dets detections total;
// detections are jittered copies of GTs (some with flipped heading) plus strays.
EvalFixture random_eval_fixture(std::mt19937_64& rng, std::size_t max_dets, std::size_t max_gts);

}  // namespace qicvt::oracle
