// One PASS/FAIL line per acceptance criterion. Tolerances and time budgets
// are fixed here; exit status is nonzero if any line fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "qicvt/harness/ablation.hpp"
#include "qicvt/harness/check.hpp"
#include "qicvt/harness/checkpoint.hpp"
#include "qicvt/harness/pipeline_eval.hpp"
#include "qicvt/harness/scene_io.hpp"
#include "qicvt/harness/synth.hpp"
#include "qicvt/harness/train.hpp"

using namespace qicvt;
namespace fs = std::filesystem;

namespace {

constexpr double kRevTol64 = 1e-10;
constexpr double kRevTol32 = 1e-5;
constexpr double kRevBudget = 5.0;
constexpr double kIdentityTol = 1e-12;
constexpr double kSimplexTol = 1e-6;
constexpr double kGatingBudget = 2.0;
constexpr double kMoeTol = 1e-9;
constexpr double kGradTol = 1e-4;
constexpr double kGradBudget = 60.0;
constexpr double kMetricsTol = 1e-12;
constexpr std::size_t kAblationWinsNeeded = 4;
constexpr double kAblationBudget = 30 * 60.0;
constexpr double kOverfitMin = 0.6;
constexpr double kUntrainedMax = 0.1;
constexpr double kOverfitBudget = 10 * 60.0;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s  %-20s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

// Runs one criterion; an exception fails that line only.
void criterion(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(false, name, std::string("threw: ") + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename F>
auto timed(double& sec, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = f();
  sec = seconds_since(t0);
  return r;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// gen -> train -> checkpoint -> load -> eval, all through files.
std::string pipeline_run(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::remove_all(dir);
  generate_dataset(cfg, cfg.seed, dir / "data");
  const TrainResult r = train_model(cfg, load_split(dir / "data", "train"));
  save_checkpoint(dir / "model.ckpt", cfg, r.params);
  write_loss_curve(dir / "loss.csv", r.curve);
  const Checkpoint ck = load_checkpoint(dir / "model.ckpt");
  std::vector<std::vector<Detection>> dets;
  const EvalReport rep = evaluate_model(ck.params, ck.config, load_split(dir / "data", "val"), &dets);
  write_report(dir / "report", rep, dets);
  std::string all;
  for (const char* f : {"model.ckpt", "loss.csv", "report/report.csv", "report/summary.txt", "report/detections.txt"})
    all += slurp(dir / f) + '\0';
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path configs = argc > 1 ? fs::path(argv[1]) : fs::path(QICVT_CONFIG_DIR);
  const fs::path scratch = fs::temp_directory_path() / "qicvt_acceptance";

  criterion("reversibility", [] {
    double sec = 0;
    const auto r = timed(sec, [] { return measure_reversibility(200, 1); });
    report(r.worst64 <= kRevTol64 && r.worst32 <= kRevTol32 && sec < kRevBudget, "reversibility",
           fmt("200 cases: err64 %.2e (<= %.0e) err32 %.2e (<= %.0e) in %.2fs (< %.0fs)", r.worst64, kRevTol64,
               r.worst32, kRevTol32, sec, kRevBudget));
  });

  criterion("identity-at-init", [] {
    const double e = measure_identity_at_init(3, 2);
    report(e <= kIdentityTol, "identity-at-init", fmt("max |G_VI - G_I| %.2e (<= %.0e)", e, kIdentityTol));
  });

  criterion("gating-simplex", [] {
    double sec = 0;
    const auto g = timed(sec, [] { return measure_gating(1000, 3); });
    report(g.worst_sum_error <= kSimplexTol && g.bad_support == 0 && g.bad_calls == 0 && sec < kGatingBudget,
           "gating-simplex",
           fmt("1000 cases: sum err %.2e (<= %.0e), %zu bad supports, %zu bad call counts in %.2fs (< %.0fs)",
               g.worst_sum_error, kSimplexTol, g.bad_support, g.bad_calls, sec, kGatingBudget));
  });

  criterion("moe-oracle", [] {
    const double e = measure_moe_oracle(100, 4);
    report(e <= kMoeTol, "moe-oracle", fmt("100 cases: max err %.2e (<= %.0e)", e, kMoeTol));
  });

  criterion("gradient-check", [] {
    double sec = 0;
    const double e = timed(sec, [] { return measure_gradients(10, 5); });
    report(e <= kGradTol && sec < kGradBudget, "gradient-check",
           fmt("10 configs: max rel err %.2e (<= %.0e) in %.1fs (< %.0fs)", e, kGradTol, sec, kGradBudget));
  });

  criterion("fps-oracle", [] {
    const std::size_t bad = measure_fps_oracle(100, 6);
    report(bad == 0, "fps-oracle", fmt("100 clouds: %zu mismatches", bad));
  });

  criterion("metrics-oracle", [] {
    const auto m = measure_metrics_oracle(50, 7);
    report(m.worst_diff <= kMetricsTol && m.aph_above_ap == 0 && m.thresholds_ok, "metrics-oracle",
           fmt("50 fixtures: max diff %.2e (<= %.0e), %zu APH>AP cells, thresholds %s", m.worst_diff, kMetricsTol,
               m.aph_above_ap, m.thresholds_ok ? "honored" : "WRONG"));
  });

  criterion("ablation-direction", [&] {
    const ExperimentConfig cfg = load_config((configs / "ablation.cfg").string());
    double sec = 0;
    const AblationResult r = timed(sec, [&] {
      return run_ablation(cfg, kAblationSeeds, [](const AblationRow& row) {
        std::printf("      seed %llu %-9s mAPH(L2) %.4f\n", static_cast<unsigned long long>(row.seed),
                    row.variant.c_str(), row.maph_l2);
        std::fflush(stdout);
      });
    });
    report(r.seeds_won >= kAblationWinsNeeded && sec < kAblationBudget, "ablation-direction",
           fmt("GAT+SELF beats both single variants on %zu/%zu seeds (>= %zu) in %.0fs (< %.0fs)", r.seeds_won,
               r.seed_count, kAblationWinsNeeded, sec, kAblationBudget));
  });

  criterion("overfit", [&] {
    const ExperimentConfig cfg = load_config((configs / "overfit.cfg").string());
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<SyntheticScene> scenes;
    for (std::size_t i = 0; i < cfg.data.train_scenes; ++i) {
      Rng rng = scene_rng(cfg.seed, "train", i);
      scenes.push_back(generate_scene(cfg, rng));
    }
    const double untrained = evaluate_model(init_model(cfg), cfg, scenes).maph_l2;
    const TrainResult r = train_model(cfg, scenes);
    const double trained = evaluate_model(r.params, cfg, scenes).maph_l2;
    const double sec = seconds_since(t0);
    report(trained >= kOverfitMin && untrained < kUntrainedMax && sec < kOverfitBudget, "overfit",
           fmt("%zu scenes, %zu steps: mAPH(L2) %.3f (>= %.1f), untrained %.3f (< %.1f) in %.0fs (< %.0fs)",
               scenes.size(), cfg.train.steps, trained, kOverfitMin, untrained, kUntrainedMax, sec, kOverfitBudget));
  });

  criterion("determinism", [&] {
    ExperimentConfig cfg;
    cfg.data.train_scenes = 6;
    cfg.data.val_scenes = 4;
    cfg.train.steps = 60;
    const std::string a = pipeline_run(cfg, scratch / "a");
    const std::string b = pipeline_run(cfg, scratch / "b");
    fs::remove_all(scratch);
    report(!a.empty() && a == b, "determinism",
           fmt("two seeded gen/train/eval runs: %zu bytes each, %s", a.size(), a == b ? "identical" : "DIFFER"));
  });

  std::printf("%s\n", failures == 0 ? "all acceptance criteria passed" : "some acceptance criteria failed");
  return failures == 0 ? 0 : 1;
}
