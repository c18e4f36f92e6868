#include "qicvt/harness/pipeline_eval.hpp"

#include <fstream>

#include "qicvt/harness/parallel.hpp"

namespace qicvt {

std::vector<std::vector<Detection>> detect_all(const ParamStore& store, const ExperimentConfig& cfg,
                                                const std::vector<SyntheticScene>& scenes) {
  std::vector<std::vector<Detection>> out(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) { out[i] = detect(store, cfg, scenes[i]); });
  return out;
}

std::vector<std::vector<GroundTruthBox>> ground_truth(const std::vector<SyntheticScene>& scenes) {
  std::vector<std::vector<GroundTruthBox>> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(s.gts);
  return out;
}

void check_compatible(const ExperimentConfig& cfg, const std::vector<SyntheticScene>& scenes) {
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Tensor& img = scenes[i].image;
    if (img.dim(0) != cfg.data.image_size || img.dim(1) != cfg.data.image_size) {
      throw ConfigError("scene " + std::to_string(i) + " image is " + shape_to_string(img.shape()) +
                        " but the model expects " + std::to_string(cfg.data.image_size) + "x" +
                        std::to_string(cfg.data.image_size));
    }
  }
}

EvalReport evaluate_model(const ParamStore& store, const ExperimentConfig& cfg, const std::vector<SyntheticScene>& scenes,
                          std::vector<std::vector<Detection>>* detections) {
  check_compatible(cfg, scenes);
  auto dets = detect_all(store, cfg, scenes);
  const auto gts = ground_truth(scenes);
  EvalReport report = evaluate(dets, gts, cfg.eval);
  if (detections) *detections = std::move(dets);
  return report;
}

void write_report(const std::filesystem::path& dir, const EvalReport& report,
                  const std::vector<std::vector<Detection>>& detections) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    return os;
  };
  open("report.csv") << report.to_csv();
  open("summary.txt") << report.summary();
  auto det = open("detections.txt");
  det << "# scene_id class score cx cy cz l w h yaw\n";
  for (std::size_t s = 0; s < detections.size(); ++s) write_detections(det, s, detections[s]);
}

}  // namespace qicvt
