#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "qicvt/harness/ablation.hpp"
#include "qicvt/harness/check.hpp"
#include "qicvt/harness/checkpoint.hpp"
#include "qicvt/harness/pipeline_eval.hpp"
#include "qicvt/harness/synth.hpp"
#include "qicvt/harness/train.hpp"
#include "qicvt/tensor/serialize.hpp"

using namespace qicvt;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("qicvt_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config(std::size_t steps = 20) {
  ExperimentConfig cfg;
  cfg.data.train_scenes = 4;
  cfg.data.val_scenes = 3;
  cfg.train.steps = steps;
  return cfg;
}

std::vector<SyntheticScene> make_scenes(const ExperimentConfig& cfg, const std::string& split, std::size_t n) {
  std::vector<SyntheticScene> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = scene_rng(cfg.seed, split, i);
    out.push_back(generate_scene(cfg, rng));
  }
  return out;
}

// Containment from squared along/across distances, no abs and no shared helper.
bool inside(const Box3& b, const Point& p) {
  if (std::abs(p.z - b.cz) > b.h / 2) return false;
  const double ux = std::cos(b.yaw), uy = std::sin(b.yaw);
  const double dx = p.x - b.cx, dy = p.y - b.cy;
  const double along = dx * ux + dy * uy;
  const double across = dy * ux - dx * uy;
  return along * along <= b.l * b.l / 4 && across * across <= b.w * b.w / 4;
}

double mean_loss(const ParamStore& store, const ExperimentConfig& cfg, const std::vector<SyntheticScene>& scenes) {
  double total = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Tape tape;
    BoundParams params(tape, store);
    total += scene_loss(params, cfg, scenes[i], Rng(99).derive(i)).total.value()[0];
  }
  return total / static_cast<double>(scenes.size());
}

}  // namespace

TEST(ConfigTest, TextRoundTrip) {
  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.data.train_scenes = 33;
  cfg.gat.depth = 3;
  cfg.self.gate.experts = 6;
  cfg.self.gate.k = 3;
  cfg.self.gate.formula = GateFormula::kLiteral;
  cfg.train.lr = 0.0025;
  cfg.keypoints = true;
  cfg.finalize();
  const ExperimentConfig back = parse_config(cfg.to_text());
  EXPECT_EQ(back.to_text(), cfg.to_text());
  EXPECT_EQ(back.self.gate.k, 3u);
  EXPECT_EQ(back.self.lidar_in, cfg.self.lidar_in);
}

TEST(ConfigTest, SectionsAndComments) {
  const auto cfg = parse_config("seed = 4  # trailing\n[gat]\ndepth = 3\n\n[self]\nexperts = 8\nk = 1\n");
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_EQ(cfg.gat.depth, 3u);
  EXPECT_EQ(cfg.self.gate.experts, 8u);
  EXPECT_EQ(cfg.self.gate.k, 1u);
}

TEST(ConfigTest, BadInputRejected) {
  EXPECT_THROW(parse_config("nonsense = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[train]\nsteps = many\n"), ConfigError);
  EXPECT_THROW(parse_config("seed\n"), ConfigError);
  EXPECT_THROW(parse_config("[self]\nexperts = 2\nk = 3\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("[grid]\nextent_z = 7\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("[gat]\nheads = 3\n").validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/qicvt.cfg"), ConfigError);
}

TEST(SynthTest, SameSeedGivesIdenticalFiles) {
  const ExperimentConfig cfg = small_config();
  TempDir a, b;
  generate_dataset(cfg, 5, a.path());
  generate_dataset(cfg, 5, b.path());
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / fs::relative(e.path(), a.path()))) << e.path();
  }
  EXPECT_EQ(files, cfg.data.train_scenes + cfg.data.val_scenes + 1);

  TempDir c;
  generate_dataset(cfg, 6, c.path());
  EXPECT_NE(slurp(scene_path(a.path(), "train", 0)), slurp(scene_path(c.path(), "train", 0)));
}

TEST(SynthTest, DistantBoxIsSparser) {
  ExperimentConfig cfg;
  cfg.data.clutter_points = 0;
  const Box3 near{4, 0, 0.8, 4.2, 1.8, 1.6, 0.3};
  Box3 far = near;
  far.cx = 18;
  double near_total = 0, far_total = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng r1(s), r2(s + 1000);
    near_total += render_scene({{near, ObjectClass::kVehicle}}, cfg, r1).gts[0].points;
    far_total += render_scene({{far, ObjectClass::kVehicle}}, cfg, r2).gts[0].points;
  }
  EXPECT_LT(far_total, near_total);
  // Means follow the generator's own expectation.
  EXPECT_NEAR(near_total / 100, expected_surface_points(near, cfg.data), 0.05 * expected_surface_points(near, cfg.data));
  EXPECT_NEAR(far_total / 100, expected_surface_points(far, cfg.data), 0.1 * expected_surface_points(far, cfg.data) + 1);
}

TEST(SynthTest, InteriorCountsMatchContainment) {
  ExperimentConfig cfg;
  TempDir dir;
  cfg.data.train_scenes = 20;
  cfg.data.val_scenes = 1;
  generate_dataset(cfg, 3, dir.path());
  std::size_t boxes = 0;
  for (const auto& scene : load_split(dir.path(), "train")) {
    EXPECT_GE(scene.gts.size(), cfg.data.min_objects);
    EXPECT_LE(scene.gts.size(), cfg.data.max_objects);
    for (const auto& gt : scene.gts) {
      std::uint32_t n = 0;
      for (const auto& p : scene.cloud) n += inside(gt.box, p) ? 1 : 0;
      EXPECT_EQ(n, gt.points);
      ++boxes;
    }
  }
  EXPECT_GT(boxes, 20u);
}

TEST(SceneIoTest, RoundTripAndCorruption) {
  const ExperimentConfig cfg;
  const SyntheticScene scene = make_scenes(cfg, "train", 1)[0];
  std::stringstream ss;
  write_scene(ss, scene);
  const std::string bytes = ss.str();
  std::istringstream in(bytes);
  const SyntheticScene back = read_scene(in);
  ASSERT_EQ(back.cloud.size(), scene.cloud.size());
  EXPECT_EQ(back.image, scene.image);
  ASSERT_EQ(back.gts.size(), scene.gts.size());
  for (std::size_t i = 0; i < scene.gts.size(); ++i) {
    EXPECT_EQ(back.gts[i].points, scene.gts[i].points);
    EXPECT_EQ(back.gts[i].box, scene.gts[i].box);
  }
  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_scene(truncated), FormatError);
  std::istringstream bad_magic("XXXX" + bytes.substr(4));
  EXPECT_THROW(read_scene(bad_magic), FormatError);
}

TEST(TrainTest, ZeroStepsIsInitialization) {
  const ExperimentConfig cfg = small_config(0);
  const auto scenes = make_scenes(cfg, "train", 2);
  const TrainResult r = train_model(cfg, scenes);
  EXPECT_TRUE(r.params == init_model(cfg));
  EXPECT_TRUE(r.curve.empty());
}

TEST(TrainTest, LossDropsOverTwoHundredSteps) {
  const ExperimentConfig cfg = small_config(200);
  const auto scenes = make_scenes(cfg, "train", 16);
  const TrainResult r = train_model(cfg, scenes);
  ASSERT_EQ(r.curve.size(), 200u);
  EXPECT_LT(mean_loss(r.params, cfg, scenes), mean_loss(init_model(cfg), cfg, scenes));
  for (const auto& rec : r.curve) EXPECT_TRUE(std::isfinite(rec.total));
}

TEST(TrainTest, SameSeedSameParameters) {
  const ExperimentConfig cfg = small_config(15);
  const auto scenes = make_scenes(cfg, "train", 3);
  const TrainResult a = train_model(cfg, scenes);
  const TrainResult b = train_model(cfg, scenes);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_FALSE(a.params == init_model(cfg));
  ExperimentConfig other = cfg;
  other.seed = 2;
  EXPECT_FALSE(train_model(other, scenes).params == a.params);
}

TEST(TrainTest, AnchorsFollowCentreCellAndClass) {
  const ExperimentConfig cfg;
  std::vector<GroundTruthBox> gts{{{2.5, -7.5, 0.8, 4, 2, 1.6, 0}, ObjectClass::kPedestrian, 10},
                                  {{2.6, -7.4, 0.8, 4, 2, 1.6, 0}, ObjectClass::kPedestrian, 10},
                                  {{40, 0, 0.8, 4, 2, 1.6, 0}, ObjectClass::kVehicle, 10}};
  const auto a = assign_anchors(cfg, gts);
  ASSERT_EQ(a.size(), 3u);
  ASSERT_TRUE(a[0].has_value());
  // stride-4 cell (0, 0) of a 4 x 4 map, pedestrian anchor
  EXPECT_EQ(*a[0], 1u);
  EXPECT_FALSE(a[1].has_value());
  EXPECT_FALSE(a[2].has_value());
}

TEST(PipelineTest, CheckpointRoundTripGivesIdenticalReport) {
  const ExperimentConfig cfg = small_config(10);
  const auto train = make_scenes(cfg, "train", 3);
  const auto val = make_scenes(cfg, "val", 3);
  const TrainResult r = train_model(cfg, train);
  TempDir dir;
  save_checkpoint(dir.path() / "m.ckpt", cfg, r.params);
  const Checkpoint ck = load_checkpoint(dir.path() / "m.ckpt");
  EXPECT_TRUE(ck.params == r.params);
  EXPECT_EQ(ck.config.to_text(), cfg.to_text());
  std::vector<std::vector<Detection>> d1, d2;
  const EvalReport a = evaluate_model(r.params, cfg, val, &d1);
  const EvalReport b = evaluate_model(ck.params, ck.config, val, &d2);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  write_report(dir.path() / "a", a, d1);
  write_report(dir.path() / "b", b, d2);
  for (const char* f : {"report.csv", "summary.txt", "detections.txt"})
    EXPECT_EQ(slurp(dir.path() / "a" / f), slurp(dir.path() / "b" / f)) << f;
}

TEST(PipelineTest, CheckpointConfigMismatchRejected) {
  ExperimentConfig cfg = small_config();
  ExperimentConfig other = cfg;
  other.gat_on = false;
  other.finalize();
  TempDir dir;
  save_checkpoint(dir.path() / "bad.ckpt", cfg, init_model(other));
  EXPECT_THROW(load_checkpoint(dir.path() / "bad.ckpt"), ConfigError);
  std::ofstream(dir.path() / "junk.ckpt") << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(dir.path() / "junk.ckpt"), FormatError);
}

TEST(PipelineTest, UntrainedReportIsWellFormed) {
  const ExperimentConfig cfg = small_config();
  const auto val = make_scenes(cfg, "val", 3);
  std::vector<std::vector<Detection>> dets;
  const EvalReport r = evaluate_model(init_model(cfg), cfg, val, &dets);
  for (const auto& cls : r.cells)
    for (const auto& cell : cls) {
      EXPECT_GE(cell.ap, 0.0);
      EXPECT_LE(cell.ap, 1.0);
      EXPECT_LE(cell.aph, cell.ap);
    }
  TempDir dir;
  write_report(dir.path(), r, dets);
  EXPECT_EQ(slurp(dir.path() / "report.csv"), r.to_csv());
  EXPECT_TRUE(fs::exists(dir.path() / "summary.txt"));
}

TEST(PipelineTest, EchoedGroundTruthScoresOne) {
  const ExperimentConfig cfg;
  const auto scenes = make_scenes(cfg, "val", 8);
  const auto gts = ground_truth(scenes);
  std::vector<std::vector<Detection>> dets(gts.size());
  for (std::size_t s = 0; s < gts.size(); ++s)
    for (const auto& g : gts[s]) dets[s].push_back({g.box, g.cls, 1.0});
  EXPECT_DOUBLE_EQ(evaluate(dets, gts, cfg.eval).maph_l2, 1.0);
}

TEST(PipelineTest, ImageSizeMismatchRejected) {
  ExperimentConfig cfg = small_config();
  const auto scenes = make_scenes(cfg, "val", 1);
  cfg.data.image_size = 16;
  cfg.finalize();
  EXPECT_THROW(check_compatible(cfg, scenes), ConfigError);
}

TEST(AblationTest, VariantsAndParameterBookkeeping) {
  ExperimentConfig cfg;
  const auto& vs = ablation_variants();
  ASSERT_EQ(vs.size(), 3u);
  EXPECT_EQ(vs.back().name, "GAT+SELF");
  std::vector<std::size_t> counts;
  for (const auto& v : vs) {
    const ExperimentConfig c = variant_config(cfg, v, 3);
    EXPECT_EQ(c.gat_on, v.gat_on);
    EXPECT_EQ(c.self.enabled, v.self_on);
    EXPECT_EQ(c.seed, 3u);
    counts.push_back(init_model(c).scalar_count());
  }
  EXPECT_NE(counts[0], counts[2]);
  EXPECT_NE(counts[1], counts[2]);
  // concat-MLP substitute stays within 10% of the SELF block
  SelfConfig off = cfg.self;
  off.enabled = false;
  const double on = static_cast<double>(self_parameter_count(cfg.self));
  EXPECT_LE(std::abs(on - static_cast<double>(self_parameter_count(off))) / on, 0.10);
}

TEST(AblationTest, TableShape) {
  ExperimentConfig cfg = small_config(2);
  cfg.data.train_scenes = 2;
  cfg.data.val_scenes = 2;
  std::size_t seen = 0;
  const AblationResult r = run_ablation(cfg, kAblationSeeds, [&](const AblationRow&) { ++seen; });
  EXPECT_EQ(r.rows.size(), 15u);
  EXPECT_EQ(seen, 15u);
  EXPECT_EQ(r.seed_count, 5u);
  EXPECT_LE(r.seeds_won, 5u);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(r.rows[i].seed, cfg.seed + i / 3);
    EXPECT_EQ(r.rows[i].variant, ablation_variants()[i % 3].name);
  }
  std::istringstream csv(r.to_csv());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 16u);
}

TEST(CheckTest, InjectedFaultBreaksReversibility) {
  EXPECT_LE(measure_reversibility(20, 1).worst64, 1e-10);
  EXPECT_GT(measure_reversibility(20, 1, true).worst64, 1e-10);
}

TEST(CheckTest, CheapSuitesPass) {
  EXPECT_EQ(measure_fps_oracle(20, 3), 0u);
  EXPECT_LE(measure_moe_oracle(20, 4), 1e-9);
  const auto m = measure_metrics_oracle(10, 5);
  EXPECT_LE(m.worst_diff, 1e-12);
  EXPECT_TRUE(m.thresholds_ok);
}
