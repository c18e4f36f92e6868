#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "qicvt/harness/ablation.hpp"
#include "qicvt/harness/check.hpp"
#include "qicvt/harness/checkpoint.hpp"
#include "qicvt/harness/pipeline_eval.hpp"
#include "qicvt/harness/synth.hpp"
#include "qicvt/harness/train.hpp"

using namespace qicvt;
namespace fs = std::filesystem;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  cfg.validate();
  return cfg;
}

int gen_data(const std::string& config, std::uint64_t seed, const std::string& out) {
  const ExperimentConfig cfg = config_or_default(config);
  generate_dataset(cfg, seed, out);
  std::cout << "wrote " << cfg.data.train_scenes << " train / " << cfg.data.val_scenes << " val scenes to " << out
            << "\n";
  return 0;
}

int train(const std::string& config, const std::string& data, const std::string& out, std::string loss_csv) {
  const ExperimentConfig cfg = config_or_default(config);
  const auto scenes = load_split(data, "train");
  check_compatible(cfg, scenes);
  // create the destination now rather than fail after training
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  const ParamStore init = init_model(cfg);
  std::cout << "params " << init.scalar_count() << " (gat " << init.scalar_count("gat.") << ", self "
            << init.scalar_count("self.") << ")\n";
  const auto t0 = std::chrono::steady_clock::now();
  const auto report_every = std::max<std::size_t>(1, cfg.train.steps / 20);
  const TrainResult r = train_model(cfg, init, scenes, [&](const LossRecord& rec) {
    if (rec.step % report_every == 0 || rec.step + 1 == cfg.train.steps) {
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("step %5zu  loss %.4f  (rpn %.3f/%.3f head %.3f/%.3f/%.3f)  %.1fs\n", rec.step, rec.total,
                  rec.rpn_obj, rec.rpn_box, rec.head_cls, rec.head_box, rec.head_conf, sec);
      std::fflush(stdout);
    }
  });
  save_checkpoint(out, cfg, r.params);
  if (loss_csv.empty()) loss_csv = out + ".loss.csv";
  write_loss_curve(loss_csv, r.curve);
  std::cout << "checkpoint " << out << ", loss curve " << loss_csv << "\n";
  return 0;
}

int eval(const std::string& ckpt, const std::string& data, const std::string& report_dir, const std::string& split) {
  const Checkpoint ck = load_checkpoint(ckpt);
  const auto scenes = load_split(data, split);
  std::vector<std::vector<Detection>> dets;
  const EvalReport report = evaluate_model(ck.params, ck.config, scenes, &dets);
  write_report(report_dir, report, dets);
  std::cout << report.summary();
  return 0;
}

int ablate(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = config_or_default(config);
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& v : ablation_variants()) {
    std::cout << v.name << ": " << init_model(variant_config(cfg, v, cfg.seed)).scalar_count() << " parameters\n";
  }
  const AblationResult r = run_ablation(cfg, kAblationSeeds, [&](const AblationRow& row) {
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("seed %llu  %-9s  mAPH(L2) %.4f  %.0fs\n", static_cast<unsigned long long>(row.seed), row.variant.c_str(),
                row.maph_l2, sec);
    std::fflush(stdout);
  });
  std::ofstream(fs::path(out) / "ablation.csv") << r.to_csv();
  std::ofstream(fs::path(out) / "summary.txt") << r.summary();
  std::cout << r.summary();
  return 0;
}

int check(bool inject_fault) {
  const auto results = run_checks({inject_fault});
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-4s  %-17s %7.2fs  %s\n", r.passed ? "ok" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
    ok = ok && r.passed;
  }
  std::cout << (ok ? "all suites passed\n" : "some suites failed\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qicvt: desk-scale LiDAR-camera fusion detector"};
  app.require_subcommand(1);

  std::string config, out, data, ckpt, report, loss_csv, split = "val";
  std::uint64_t seed = 1;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", config, "config file (defaults if omitted)");
  gen->add_option("--seed", seed, "dataset seed")->required();
  gen->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--config", config, "config file (defaults if omitted)");
  tr->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "checkpoint path")->required();
  tr->add_option("--loss-csv", loss_csv, "loss curve path (default CKPT.loss.csv)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--report", report, "report directory")->required();
  ev->add_option("--split", split, "train or val")->check(CLI::IsMember({"train", "val"}));

  auto* ab = app.add_subcommand("ablate", "GAT/SELF ablation over 5 seeds");
  ab->add_option("--config", config, "config file (defaults if omitted)");
  ab->add_option("--out", out, "output directory")->required();

  bool inject_fault = false;
  auto* ck = app.add_subcommand("check", "run the invariant suites");
  ck->add_flag("--inject-fault", inject_fault, "perturb the reversible inverse (negative control)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_data(config, seed, out);
    if (*tr) return train(config, data, out, loss_csv);
    if (*ev) return eval(ckpt, data, report, split);
    if (*ab) return ablate(config, out);
    if (*ck) return check(inject_fault);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
