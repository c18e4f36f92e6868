#include "qicvt/oracles/eval_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "qicvt/oracles/iou_oracle.hpp"

namespace qicvt::oracle {

namespace {

struct Ranked {
  double score;
  std::size_t scene, det;
  bool tp;
  double weight;
};

double ap_from_prefixes(std::vector<Ranked> r, std::size_t n_gt, bool weighted) {
  if (n_gt == 0) return r.empty() ? 1.0 : 0.0;
  std::sort(r.begin(), r.end(), [](const Ranked& a, const Ranked& b) {
    return std::make_tuple(-a.score, a.scene, a.det) < std::make_tuple(-b.score, b.scene, b.det);
  });
  double sum = 0;
  for (int k = 0; k <= 100; ++k) {
    double best = 0;
    // Every prefix length n: recount from scratch.
    for (std::size_t n = 1; n <= r.size(); ++n) {
      double tp = 0, mass = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!r[i].tp) continue;
        tp += 1;
        mass += weighted ? r[i].weight : 1.0;
      }
      if (tp / n_gt + 1e-12 >= k / 100.0) best = std::max(best, mass / n);
    }
    sum += best;
  }
  return sum / 101;
}

}  // namespace

BruteReport evaluate_bruteforce(const std::vector<std::vector<Detection>>& dets,
                                const std::vector<std::vector<GroundTruthBox>>& gts,
                                const std::array<double, kNumClasses>& thresholds) {
  BruteReport rep;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (int level = 0; level < 2; ++level) {
      std::vector<Ranked> ranked;
      std::size_t n_gt = 0;
      for (std::size_t s = 0; s < dets.size(); ++s) {
        std::vector<const Detection*> ds;
        std::vector<const GroundTruthBox*> gs;
        std::vector<bool> counts;
        for (const auto& d : dets[s]) if (static_cast<std::size_t>(d.cls) == c) ds.push_back(&d);
        for (const auto& g : gts[s]) {
          if (static_cast<std::size_t>(g.cls) != c) continue;
          gs.push_back(&g);
          const bool ok = level == 0 ? g.points >= 6 : g.points >= 1;
          counts.push_back(ok);
          n_gt += ok;
        }
        std::vector<std::vector<double>> iou(ds.size(), std::vector<double>(gs.size()));
        for (std::size_t i = 0; i < ds.size(); ++i)
          for (std::size_t j = 0; j < gs.size(); ++j) iou[i][j] = oracle::iou_3d(ds[i]->box, gs[j]->box);

        std::vector<bool> done(ds.size(), false), used(gs.size(), false);
        for (std::size_t step = 0; step < ds.size(); ++step) {
          std::size_t pick = ds.size();
          for (std::size_t i = 0; i < ds.size(); ++i)
            if (!done[i] && (pick == ds.size() || ds[i]->score > ds[pick]->score)) pick = i;
          done[pick] = true;
          // Evaluated GTs take priority over ignored ones regardless of IoU.
          std::size_t best = gs.size();
          for (std::size_t j = 0; j < gs.size(); ++j) {
            if (used[j] || iou[pick][j] < thresholds[c]) continue;
            if (best == gs.size() || (counts[j] && !counts[best]) ||
                (counts[j] == counts[best] && iou[pick][j] > iou[pick][best]))
              best = j;
          }
          if (best < gs.size()) used[best] = true;
          if (best < gs.size() && !counts[best]) continue;
          const bool tp = best < gs.size();
          double w = 0;
          if (tp) {
            double d = std::remainder(ds[pick]->box.yaw - gs[best]->box.yaw, 2 * kPi);
            w = 1 - std::abs(d) / kPi;
          }
          ranked.push_back({ds[pick]->score, s, pick, tp, w});
        }
      }
      rep.ap[c][level] = ap_from_prefixes(ranked, n_gt, false);
      rep.aph[c][level] = ap_from_prefixes(ranked, n_gt, true);
    }
    rep.maph_l2 += rep.aph[c][1] / kNumClasses;
  }
  return rep;
}

}  // namespace qicvt::oracle

namespace qicvt::oracle {

EvalFixture random_eval_fixture(std::mt19937_64& rng, std::size_t max_dets, std::size_t max_gts) {
  std::uniform_real_distribution<double> u(0, 1);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(u(rng) * n) % n; };
  EvalFixture f;
  const std::size_t scenes = 1 + pick(3);
  f.dets.resize(scenes);
  f.gts.resize(scenes);
  const std::size_t n_gt = pick(max_gts + 1);
  const std::size_t n_det = pick(max_dets + 1);
  const double sizes[3][3] = {{4.0, 1.8, 1.6}, {0.8, 0.8, 1.8}, {1.8, 0.6, 1.7}};
  std::vector<std::pair<std::size_t, GroundTruthBox>> all;
  for (std::size_t i = 0; i < n_gt; ++i) {
    GroundTruthBox g;
    const std::size_t c = pick(3);
    g.cls = static_cast<ObjectClass>(c);
    g.box = {u(rng) * 12, u(rng) * 12 - 6, sizes[c][2] / 2, sizes[c][0], sizes[c][1], sizes[c][2],
             wrap_angle(u(rng) * 2 * kPi)};
    const double r = u(rng);
    g.points = r < 0.15 ? 0 : r < 0.45 ? 1 + static_cast<std::uint32_t>(pick(5)) : 6 + static_cast<std::uint32_t>(pick(40));
    const std::size_t s = pick(scenes);
    f.gts[s].push_back(g);
    all.emplace_back(s, g);
  }
  for (std::size_t i = 0; i < n_det; ++i) {
    Detection d;
    std::size_t s = pick(scenes);
    if (!all.empty() && u(rng) < 0.75) {
      const auto& [gs, g] = all[pick(all.size())];
      s = gs;
      d.cls = u(rng) < 0.9 ? g.cls : static_cast<ObjectClass>(pick(3));
      d.box = g.box;
      const double j = u(rng) < 0.5 ? 0.05 : 0.4;
      d.box.cx += (u(rng) - 0.5) * j * d.box.l;
      d.box.cy += (u(rng) - 0.5) * j * d.box.w;
      d.box.cz += (u(rng) - 0.5) * j * d.box.h;
      d.box.yaw = wrap_angle(d.box.yaw + (u(rng) < 0.2 ? kPi : (u(rng) - 0.5) * 1.2));
    } else {
      const std::size_t c = pick(3);
      d.cls = static_cast<ObjectClass>(c);
      d.box = {u(rng) * 12, u(rng) * 12 - 6, sizes[c][2] / 2, sizes[c][0], sizes[c][1], sizes[c][2],
               wrap_angle(u(rng) * 2 * kPi)};
    }
    d.score = u(rng);
    f.dets[s].push_back(d);
  }
  return f;
}

}  // namespace qicvt::oracle
