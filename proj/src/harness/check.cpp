#include "qicvt/harness/check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "qicvt/frontend/pointcloud.hpp"
#include "qicvt/gat/gat.hpp"
#include "qicvt/metrics/metrics.hpp"
#include "qicvt/oracles/eval_oracle.hpp"
#include "qicvt/oracles/fps_oracle.hpp"
#include "qicvt/oracles/moe_oracle.hpp"
#include "qicvt/self_moe/fusion.hpp"
#include "qicvt/tensor/grad_check.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {
namespace {

Tensor randn(std::mt19937_64& rng, Shape shape, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

void randomize(ParamStore& store, std::mt19937_64& rng, double stddev) {
  for (auto& [name, t] : store.all()) t = randn(rng, t.shape(), stddev);
}

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  const std::size_t n = t.dim(1);
  return {t.data() + r * n, t.data() + (r + 1) * n};
}

}  // namespace

ReversibilityResult measure_reversibility(std::size_t cases, std::uint64_t seed, bool inject_fault) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> tokens(1, 40);
  ReversibilityResult out;
  for (std::size_t trial = 0; trial < cases; ++trial) {
    const BlockShape shape{trial % 2 ? 16u : 8u, trial % 3 ? 4u : 2u, 1 + trial % 4, 1e-5};
    ParamStore store;
    Rng init(rng());
    init_block(store, "b", shape, init, false);
    BlockWeights<Tensor> w = block_weights(store, "b");
    for (auto& t : w) t = randn(rng, t.shape(), 0.5);
    BlockWeights<Tensor> inv = w;
    if (inject_fault) inv[kBo].values()[0] += 1e-3;
    const Tensor x = randn(rng, {tokens(rng), shape.channels});
    out.worst64 = std::max(out.worst64, max_abs_diff(reversible_block_inverse(inv, reversible_block_forward(w, x, shape), shape), x));
    out.worst64 = std::max(out.worst64, max_abs_diff(reversible_block_forward(w, reversible_block_inverse(inv, x, shape), shape), x));

    const auto wf = to_f32(w);
    const auto invf = to_f32(inv);
    const TensorF xf = x.cast<float>();
    out.worst32 = std::max(out.worst32, max_abs_diff(reversible_block_inverse(invf, reversible_block_forward(wf, xf, shape), shape), xf));
    out.worst32 = std::max(out.worst32, max_abs_diff(reversible_block_forward(wf, reversible_block_inverse(invf, xf, shape), shape), xf));
  }
  return out;
}

double measure_identity_at_init(std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (std::size_t trial = 0; trial < cases; ++trial) {
    const GatConfig cfg;
    ParamStore store;
    Rng init(rng());
    init_gat(store, cfg, init);
    Tape tape;
    BoundParams params(tape, store);
    const Tensor g_i = randn(rng, {8, 8, cfg.image_channels});
    const Var g_vi = gat_forward(params, tape.constant(g_i), tape.constant(randn(rng, {8, 8, 4, cfg.voxel_channels})), cfg);
    if (g_vi.shape() != g_i.shape()) return INFINITY;
    worst = std::max(worst, max_abs_diff(g_vi.value(), g_i));
  }
  return worst;
}

GatingResult measure_gating(std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> nd(1, 16), md(1, 4);
  GatingResult out;
  for (std::size_t trial = 0; trial < cases; ++trial) {
    GateConfig g;
    g.experts = nd(rng);
    g.k = 1 + rng() % g.experts;
    const std::size_t m = md(rng);
    const Tensor w = top_k_gate(randn(rng, {m, g.experts}, 4.0), g.k);
    for (std::size_t r = 0; r < m; ++r) {
      double total = 0;
      std::size_t nonzero = 0;
      bool negative = false;
      for (std::size_t i = 0; i < g.experts; ++i) {
        total += w.at(r, i);
        nonzero += w.at(r, i) != 0.0 ? 1 : 0;
        negative = negative || w.at(r, i) < 0.0;
      }
      out.worst_sum_error = std::max(out.worst_sum_error, std::abs(total - 1.0));
      if (nonzero != g.k || negative) ++out.bad_support;
    }

    // the counter has to see exactly k expert evaluations per row
    ParamStore store;
    const ExpertShape shape{3, 4, 2};
    Rng init(rng());
    init_moe(store, "m", g, shape, init);
    Tape tape;
    BoundParams params(tape, store);
    ExpertCallCounter calls;
    const Tensor noise = sample_gate_noise(Rng(trial), m, shape.in, g);
    moe_forward(params, "m", tape.constant(randn(rng, {m, shape.in})), g, shape, &noise, trial % 2 == 0, &calls);
    if (calls.total() != g.k * m) ++out.bad_calls;
  }
  return out;
}

double measure_moe_oracle(std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (std::size_t trial = 0; trial < cases; ++trial) {
    GateConfig g;
    g.experts = 2 + trial % 7;
    g.k = 1 + rng() % g.experts;
    g.formula = trial % 3 == 0 ? GateFormula::kLiteral : GateFormula::kCited;
    const bool train = trial % 2 == 0;
    const ExpertShape shape{4, 5, 3};
    ParamStore store;
    Rng init(rng());
    init_moe(store, "m", g, shape, init);
    randomize(store, rng, 0.5);
    Tape tape;
    BoundParams params(tape, store);
    const std::size_t m = 1 + trial % 7;
    const Tensor x = randn(rng, {m, shape.in});
    const Tensor noise = sample_gate_noise(Rng(rng()), m, shape.in, g);
    const MoeOutput out = moe_forward(params, "m", tape.constant(x), g, shape, &noise, train);
    for (std::size_t r = 0; r < m; ++r) {
      const auto n = row_of(noise, r);
      const auto want = oracle::moe_dense(store, "m", row_of(x, r), g, &n, train);
      for (std::size_t j = 0; j < want.size(); ++j)
        worst = std::max(worst, std::abs(out.mixture.value().at(r, j) - want[j]));
    }
  }
  return worst;
}

double measure_gradients(std::size_t configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (std::size_t trial = 0; trial < configs; ++trial) {
    GatConfig gat;
    gat.image_channels = 8;
    gat.image_tokens = 4;
    gat.voxel_channels = 8;
    gat.voxel_tokens = 8;
    gat.depth = 1 + trial % 2;
    gat.heads = trial % 3 == 0 ? 1 : 2;
    gat.global_tokens = 1 + trial % 2;
    gat.align_dim = 4;
    gat.recompute = trial % 2 == 0;

    SelfConfig self;
    self.gate.experts = 2 + trial % 3;
    self.gate.k = 1 + trial % self.gate.experts;
    self.gate.formula = trial % 4 == 3 ? GateFormula::kLiteral : GateFormula::kCited;
    self.lidar_in = 5;
    self.image_in = gat.image_channels;
    self.expert_hidden = 4;
    self.expert_out = 3;
    self.fusion_hidden = 4;
    self.fused = 3;

    ParamStore store;
    Rng init(rng());
    init_gat(store, gat, init, false);
    init_self(store, self, init);
    randomize(store, rng, 0.4);

    const std::size_t p = 4;  // proposals, one per image token
    std::vector<std::string> names;
    std::vector<Tensor> inputs{randn(rng, {2, 2, 8}), randn(rng, {2, 2, 2, 8}), randn(rng, {p, self.lidar_in})};
    for (const auto& [name, t] : store.all()) {
      names.push_back(name);
      inputs.push_back(t);
    }
    const Tensor ln = sample_gate_noise(Rng(rng()), p, self.lidar_in, self.gate);
    const Tensor in = sample_gate_noise(Rng(rng()), p, self.image_in, self.gate);
    const Tensor probe = randn(rng, {p, self.fused});

    // selections taken at the unperturbed point and held fixed
    Selection lsel, isel;
    const auto build = [&](Tape& tape, std::span<const Var> v, bool record) {
      BoundParams params(tape, store);
      for (std::size_t i = 0; i < names.size(); ++i) params.set(names[i], v[3 + i]);
      const Var img = tokenize(gat_forward(params, v[0], v[1], gat));
      const SelfFixings fix{&ln, &in, record ? nullptr : &lsel, record ? nullptr : &isel};
      SelfOutput out = self_forward(params, v[2], img, self, true, nullptr, fix);
      if (record) {
        lsel = out.lidar->gate.selection;
        isel = out.image->gate.selection;
      }
      return sum(mul(out.fused, constant_like(out.fused, probe)));
    };
    {
      Tape tape;
      std::vector<Var> leaves;
      for (const auto& t : inputs) leaves.push_back(tape.constant(t));
      build(tape, leaves, true);
    }
    const auto f = [&](Tape& tape, std::span<const Var> v) { return build(tape, v, false); };
    worst = std::max(worst, grad_check(f, inputs, 1e-5).max_rel_error);
  }
  return worst;
}

std::size_t measure_fps_oracle(std::size_t clouds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(1, 64);
  std::uniform_real_distribution<double> pos(-5, 5), refl(0, 1);
  std::size_t mismatches = 0;
  for (std::size_t trial = 0; trial < clouds; ++trial) {
    RawPointCloud cloud(size(rng));
    for (auto& pt : cloud) pt = {pos(rng), pos(rng), pos(rng), refl(rng)};
    // a few exact duplicates so ties get exercised
    if (cloud.size() > 3 && trial % 4 == 0) cloud[1] = cloud[2];
    const std::size_t k = 1 + rng() % cloud.size();
    const std::size_t first = rng() % cloud.size();
    if (fps(cloud, k, first) != oracle::fps_bruteforce(cloud, k, first)) ++mismatches;
  }
  return mismatches;
}

MetricsOracleResult measure_metrics_oracle(std::size_t fixtures, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MetricsOracleResult out;
  const EvalConfig cfg;
  for (std::size_t t = 0; t < fixtures; ++t) {
    const auto f = oracle::random_eval_fixture(rng, 10, 5);
    const EvalReport r = evaluate(f.dets, f.gts, cfg);
    const auto o = oracle::evaluate_bruteforce(f.dets, f.gts, cfg.iou_thresholds);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (int l = 0; l < 2; ++l) {
        out.worst_diff = std::max({out.worst_diff, std::abs(r.cells[c][l].ap - o.ap[c][l]),
                                   std::abs(r.cells[c][l].aph - o.aph[c][l])});
        if (r.cells[c][l].aph > r.cells[c][l].ap) ++out.aph_above_ap;
      }
    }
    out.worst_diff = std::max(out.worst_diff, std::abs(r.maph_l2 - o.maph_l2));
  }

  // A detection shifted a quarter length along the box axis has IoU 0.6.
  out.thresholds_ok = true;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<ObjectClass>(c);
    const Box3 gt{0, 0, 1, 4, 2, 2, 0};
    Box3 shifted = gt;
    shifted.cx += gt.l / 4;
    const std::vector<std::vector<Detection>> dets{{{shifted, cls, 0.9}}};
    const std::vector<std::vector<GroundTruthBox>> gts{{{gt, cls, 50}}};
    const double ap = evaluate(dets, gts, cfg).cells[c][1].ap;
    const bool should_match = cfg.iou_thresholds[c] <= 0.6;
    if (ap != (should_match ? 1.0 : 0.0)) out.thresholds_ok = false;
  }
  return out;
}

std::vector<SuiteResult> run_checks(const CheckOptions& options) {
  std::vector<SuiteResult> results;
  const auto timed = [&](const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
    SuiteResult r;
    r.name = name;
    std::ostringstream detail;
    detail.precision(3);
    const auto start = std::chrono::steady_clock::now();
    try {
      r.passed = body(detail);
    } catch (const std::exception& e) {
      r.passed = false;
      detail << "threw: " << e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.detail = detail.str();
    results.push_back(std::move(r));
  };

  timed("reversibility", [&](std::ostringstream& d) {
    const auto r = measure_reversibility(200, 1, options.inject_fault);
    d << "err64 " << r.worst64 << " err32 " << r.worst32;
    return r.worst64 <= 1e-10 && r.worst32 <= 1e-5;
  });
  timed("identity-at-init", [&](std::ostringstream& d) {
    const double e = measure_identity_at_init(3, 2);
    d << "max |G_VI - G_I| " << e;
    return e <= 1e-12;
  });
  timed("gating-simplex", [&](std::ostringstream& d) {
    const auto r = measure_gating(1000, 3);
    d << "sum err " << r.worst_sum_error << " bad support " << r.bad_support << " bad calls " << r.bad_calls;
    return r.worst_sum_error <= 1e-6 && r.bad_support == 0 && r.bad_calls == 0;
  });
  timed("moe-oracle", [&](std::ostringstream& d) {
    const double e = measure_moe_oracle(100, 4);
    d << "max err " << e;
    return e <= 1e-9;
  });
  timed("gradients", [&](std::ostringstream& d) {
    const double e = measure_gradients(10, 5);
    d << "max rel err " << e;
    return e <= 1e-4;
  });
  timed("fps-oracle", [&](std::ostringstream& d) {
    const std::size_t bad = measure_fps_oracle(100, 6);
    d << bad << " mismatches";
    return bad == 0;
  });
  timed("metrics-oracle", [&](std::ostringstream& d) {
    const auto r = measure_metrics_oracle(50, 7);
    d << "max diff " << r.worst_diff << " aph>ap " << r.aph_above_ap << " thresholds " << (r.thresholds_ok ? "ok" : "wrong");
    return r.worst_diff <= 1e-12 && r.aph_above_ap == 0 && r.thresholds_ok;
  });
  return results;
}

}  // namespace qicvt
