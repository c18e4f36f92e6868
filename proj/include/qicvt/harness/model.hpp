#pragma once

#include <optional>
#include <vector>

#include "qicvt/harness/config.hpp"
#include "qicvt/harness/scene_io.hpp"
#include "qicvt/tensor/params.hpp"

namespace qicvt {

// Every parameter of the configured model, drawn from streams of cfg.seed.
ParamStore init_model(const ExperimentConfig& cfg);

struct SceneEncoding {
  StageVolumes volumes;
  RpnOutput rpn;
  Var image_map;  // G_VI, or G_I with GAT off
  RawPointCloud keypoints;
};

// Everything computed once per scene: backbone stages, RPN scores, image map.
SceneEncoding encode_scene(BoundParams& params, const ExperimentConfig& cfg, const SyntheticScene& scene);

struct HeadPass {
  Var head;  // (P, kHeadOutputs)
  Var aux_loss;
  ExpertCallCounter lidar_calls, image_calls;
};

// RoI features (+ keypoint descriptor), image context, SELF and the head for one proposal set.
HeadPass head_pass(BoundParams& params, const ExperimentConfig& cfg, const SceneEncoding& enc,
                   std::span<const Proposal> proposals, bool train, const Rng* noise_rng);

// Proposals moved to the boxes the head decoded, yaw folded to the axis as
// the RPN would give it; anchor and score unchanged.
std::vector<Proposal> refined_proposals(const Tensor& head, std::span<const Proposal> proposals);

// RPN proposals, then decoded `forced_anchors` not already present, then
// `extra` with their anchor's objectness as score.
std::vector<Proposal> initial_proposals(const ExperimentConfig& cfg, const RpnOutput& rpn,
                                        std::span<const std::size_t> forced_anchors, std::span<const Proposal> extra);

struct ModelOutput {
  RpnOutput rpn;
  std::vector<Proposal> proposals;
  Var image_map;  // G_VI, or G_I with GAT off
  Var head;       // (P, kHeadOutputs)
  Var aux_loss;   // load-balance term when enabled
  ExpertCallCounter lidar_calls, image_calls;
};

// Full pass: voxelize -> backbone -> RPN proposals -> RoI features; image
// encoder -> GAT (or passthrough) -> per-box image context; SELF (or
// concat-MLP) -> head. Proposals decoded from `forced_anchors` are appended
// after the RPN's own unless already present, then `extra` proposals, whose
// score is taken from their anchor's objectness (training uses both so every
// object has proposals to learn from).
ModelOutput model_forward(BoundParams& params, const ExperimentConfig& cfg, const SyntheticScene& scene, bool train,
                          const Rng* noise_rng, std::span<const std::size_t> forced_anchors = {},
                          std::span<const Proposal> extra = {});

// Inference: the head runs cfg.refine_passes times, each pass starting from
// the previous pass's boxes; then per-class BEV NMS.
std::vector<Detection> detect(const ParamStore& store, const ExperimentConfig& cfg, const SyntheticScene& scene);

}  // namespace qicvt
