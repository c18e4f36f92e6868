#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "qicvt/metrics/metrics.hpp"

namespace qicvt {

namespace {

constexpr Difficulty kLevels[2] = {Difficulty::kLevel1, Difficulty::kLevel2};

}  // namespace

EvalReport evaluate(std::span<const std::vector<Detection>> dets, std::span<const std::vector<GroundTruthBox>> gts,
                    const EvalConfig& cfg) {
  if (dets.size() != gts.size()) throw std::invalid_argument("detections and ground truth cover different scene counts");
  EvalReport report;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<ObjectClass>(c);
    for (std::size_t l = 0; l < 2; ++l) {
      CellResult& cell = report.cells[c][l];
      std::vector<RankedMatch> ranked;
      for (std::size_t s = 0; s < dets.size(); ++s) {
        std::vector<Detection> class_dets;
        for (const auto& d : dets[s]) {
          if (d.cls == cls) class_dets.push_back(d);
        }
        std::vector<GroundTruthBox> class_gts;
        std::vector<bool> evaluated;
        for (const auto& g : gts[s]) {
          if (g.cls != cls) continue;
          class_gts.push_back(g);
          evaluated.push_back(evaluated_at(difficulty_of(g.points), kLevels[l]));
          if (evaluated.back()) ++cell.n_gt;
        }
        for (const Match& m : match_detections(class_dets, class_gts, cfg.iou_thresholds[c], evaluated)) {
          if (m.kind == MatchKind::kIgnored) {
            ++cell.ignored;
            continue;
          }
          const bool tp = m.kind == MatchKind::kTruePositive;
          ranked.push_back({class_dets[m.det].score, tp, m.heading});
          ++(tp ? cell.tp : cell.fp);
        }
      }
      cell.n_det = ranked.size();
      cell.ap = average_precision(ranked, cell.n_gt, false);
      cell.aph = average_precision(std::move(ranked), cell.n_gt, true);
    }
    report.map_l2 += report.cells[c][1].ap / kNumClasses;
    report.maph_l2 += report.cells[c][1].aph / kNumClasses;
  }
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "class,difficulty,AP,APH,n_gt,n_det,tp,fp\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t l = 0; l < 2; ++l) {
      const CellResult& r = cells[c][l];
      os << class_short_name(static_cast<ObjectClass>(c)) << ",L" << (l + 1) << ',' << r.ap << ',' << r.aph << ','
         << r.n_gt << ',' << r.n_det << ',' << r.tp << ',' << r.fp << '\n';
    }
  }
  os << "ALL,L2," << map_l2 << ',' << maph_l2 << ",,,,\n";
  return os.str();
}

std::string EvalReport::summary() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "level | VEH AP/APH    | PED AP/APH    | CYC AP/APH    | ALL mAPH\n";
  for (std::size_t l = 0; l < 2; ++l) {
    os << "L" << (l + 1) << "    ";
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      os << " | " << std::setw(5) << 100 * cells[c][l].ap << '/' << std::setw(6) << std::left << 100 * cells[c][l].aph
         << std::right << " ";
    }
    if (l == 1) os << " | " << 100 * maph_l2;
    os << '\n';
  }
  return os.str();
}

ObjectClass parse_class(const std::string& token) {
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<ObjectClass>(c);
    if (token == class_short_name(cls) || token == class_name(cls)) return cls;
  }
  throw std::runtime_error("unknown class '" + token + "'");
}

std::map<std::size_t, std::vector<Detection>> read_detections(std::istream& is) {
  std::map<std::size_t, std::vector<Detection>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t scene;
    std::string cls;
    Detection d;
    Box3& b = d.box;
    if (!(ls >> scene >> cls >> d.score >> b.cx >> b.cy >> b.cz >> b.l >> b.w >> b.h >> b.yaw)) {
      throw std::runtime_error("detection file line " + std::to_string(line_no) + ": expected 10 fields");
    }
    std::string extra;
    if (ls >> extra) throw std::runtime_error("detection file line " + std::to_string(line_no) + ": trailing data");
    d.cls = parse_class(cls);
    if (!(d.score >= 0 && d.score <= 1) || !(b.l > 0 && b.w > 0 && b.h > 0) || !std::isfinite(b.cx) ||
        !std::isfinite(b.cy) || !std::isfinite(b.cz) || !std::isfinite(b.yaw)) {
      throw std::runtime_error("detection file line " + std::to_string(line_no) + ": invalid values");
    }
    b.yaw = wrap_angle(b.yaw);
    out[scene].push_back(d);
  }
  return out;
}

void write_detections(std::ostream& os, std::size_t scene_id, std::span<const Detection> dets) {
  const auto old = os.precision(17);
  for (const auto& d : dets) {
    os << scene_id << ' ' << class_short_name(d.cls) << ' ' << d.score << ' ' << d.box.cx << ' ' << d.box.cy << ' '
       << d.box.cz << ' ' << d.box.l << ' ' << d.box.w << ' ' << d.box.h << ' ' << d.box.yaw << '\n';
  }
  os.precision(old);
}

}  // namespace qicvt
