#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qicvt/frontend/geometry.hpp"

namespace qicvt {

struct GroundTruthBox {
  Box3 box;
  ObjectClass cls = ObjectClass::kVehicle;
  std::uint32_t points = 0;  // LiDAR points inside the box
};

enum class Difficulty : std::uint8_t { kLevel1, kLevel2, kExcluded };
inline constexpr std::uint32_t kLevel1MinPoints = 6;

// >= 6 points: L1; 1-5: L2 only; 0: excluded from both.
Difficulty difficulty_of(std::uint32_t points);
std::vector<Difficulty> difficulty_split(std::span<const GroundTruthBox> gts);
// Whether a box of difficulty d takes part when evaluating `level` (L2 is cumulative).
bool evaluated_at(Difficulty d, Difficulty level);

// BEV intersection (polygon clipping) times vertical overlap over the union of volumes.
double iou_3d(const Box3& a, const Box3& b);

// 1 - |wrap(yaw_det - yaw_gt)| / pi.
double heading_weight(double yaw_det, double yaw_gt);

enum class MatchKind : std::uint8_t { kTruePositive, kFalsePositive, kIgnored };

struct Match {
  std::size_t det = 0;
  MatchKind kind = MatchKind::kFalsePositive;
  std::size_t gt = 0;  // valid for TP and ignored
  double iou = 0;
  double heading = 0;  // heading weight for TP
};

// Greedy matching within one scene and one class. Detections go in descending
// score order (ties: lower index); each takes the highest-IoU unmatched
// evaluated GT with IoU >= threshold (ties: lower GT index). A detection that
// finds none but overlaps an unmatched ignored GT (gt_evaluated false) the
// same way is marked ignored. Results are in processing order.
std::vector<Match> match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                                    double iou_threshold, const std::vector<bool>& gt_evaluated = {});

struct RankedMatch {
  double score = 0;
  bool tp = false;
  double heading = 0;
};

// 101-point interpolated AP over matches ranked by descending score (stable).
// Weighted: each TP contributes its heading weight to the precision numerator;
// recall and FP counting are unchanged.
double average_precision(std::vector<RankedMatch> matches, std::size_t n_gt, bool weighted);

struct EvalConfig {
  std::array<double, kNumClasses> iou_thresholds{0.7, 0.5, 0.5};
};

struct CellResult {
  double ap = 0, aph = 0;
  std::size_t n_gt = 0, n_det = 0, tp = 0, fp = 0, ignored = 0;
};

struct EvalReport {
  // [class][0 = L1, 1 = L2]
  std::array<std::array<CellResult, 2>, kNumClasses> cells{};
  double map_l2 = 0;
  double maph_l2 = 0;

  std::string to_csv() const;
  // Table-style text: one row per level with AP/APH per class and mAPH.
  std::string summary() const;
};

EvalReport evaluate(std::span<const std::vector<Detection>> dets, std::span<const std::vector<GroundTruthBox>> gts,
                    const EvalConfig& cfg = {});

// Text detection file: "scene_id class score cx cy cz l w h yaw" per line,
// class as VEH / PED / CYC. Throws std::runtime_error on malformed lines.
std::map<std::size_t, std::vector<Detection>> read_detections(std::istream& is);
void write_detections(std::ostream& os, std::size_t scene_id, std::span<const Detection> dets);
ObjectClass parse_class(const std::string& token);

}  // namespace qicvt
