#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "qicvt/harness/model.hpp"

namespace qicvt {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossRecord {
  std::size_t step = 0;
  double total = 0;
  double rpn_obj = 0, rpn_box = 0;
  double head_cls = 0, head_box = 0, head_conf = 0;
  double aux = 0;
  double lr = 0, grad_norm = 0;
};

struct SceneLoss {
  Var total;
  LossRecord parts;
};

// Anchor index of each GT (cell of its centre, its class), or nullopt if the
// centre is off the grid. Later GTs sharing an anchor are dropped.
std::vector<std::optional<std::size_t>> assign_anchors(const ExperimentConfig& cfg, std::span<const GroundTruthBox> gts);

// Focal objectness + smooth-L1 anchor residuals; cross-entropy class,
// smooth-L1 box/heading residuals and BCE confidence on head proposals; plus
// the load-balance term when enabled.
SceneLoss scene_loss(BoundParams& params, const ExperimentConfig& cfg, const SyntheticScene& scene,
                     const Rng& noise_rng);

struct TrainResult {
  ParamStore params;
  std::vector<LossRecord> curve;
};

// SGD with momentum, linear warmup then cosine decay, global-norm clipping.
// One scene per step; epoch order reshuffled from cfg.seed. Deterministic.
// Throws TrainingDiverged on a non-finite loss or gradient.
TrainResult train_model(const ExperimentConfig& cfg, const std::vector<SyntheticScene>& scenes,
                        const std::function<void(const LossRecord&)>& on_step = {});
TrainResult train_model(const ExperimentConfig& cfg, ParamStore init, const std::vector<SyntheticScene>& scenes,
                        const std::function<void(const LossRecord&)>& on_step = {});

void write_loss_curve(const std::filesystem::path& path, const std::vector<LossRecord>& curve);

}  // namespace qicvt
