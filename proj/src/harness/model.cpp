#include "qicvt/harness/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qicvt/frontend/keypoints.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

namespace {

constexpr double kPostNmsIou = 0.5;
const std::string kContextPrefix = "ctx";

}  // namespace

ParamStore init_model(const ExperimentConfig& cfg) {
  cfg.validate();
  ParamStore store;
  const Rng root(cfg.seed);
  Rng r0 = root.derive(100), r1 = root.derive(101), r2 = root.derive(102), r3 = root.derive(103);
  Rng r4 = root.derive(104), r5 = root.derive(105), r6 = root.derive(106), r7 = root.derive(107);
  init_backbone(store, cfg.backbone, r0);
  init_rpn(store, cfg.backbone, cfg.grid, cfg.rpn, r1);
  init_roi_pool(store, cfg.backbone, cfg.roi, r2);
  init_image_encoder(store, cfg.image, r3);
  if (cfg.gat_on) init_gat(store, cfg.gat, r4);
  init_image_context(store, kContextPrefix, cfg.image.out_channels, r5);
  init_self(store, cfg.self, r6);
  init_detect_head(store, cfg.head, r7);
  return store;
}

SceneEncoding encode_scene(BoundParams& params, const ExperimentConfig& cfg, const SyntheticScene& scene) {
  SceneEncoding enc;
  const FeatureVolume base = voxelize(scene.cloud, cfg.grid);
  enc.volumes = downsample_stages(params, base, cfg.backbone);
  enc.rpn = rpn_forward(params, enc.volumes, cfg.rpn);
  const Var g_i = image_features(params, scene.image, cfg.image);
  enc.image_map = cfg.gat_on ? gat_forward(params, g_i, enc.volumes.features[1], cfg.gat) : g_i;
  if (cfg.keypoints) enc.keypoints = grid_keypoints(scene.cloud, cfg.grid, cfg.keypoint_count);
  return enc;
}

HeadPass head_pass(BoundParams& params, const ExperimentConfig& cfg, const SceneEncoding& enc,
                   std::span<const Proposal> proposals, bool train, const Rng* noise_rng) {
  std::vector<Box3> boxes;
  boxes.reserve(proposals.size());
  for (const Proposal& p : proposals) boxes.push_back(p.box);
  Var g_l = roi_pool(params, enc.volumes, boxes, cfg.roi);
  if (cfg.keypoints) {
    const Var parts[] = {g_l, constant_like(g_l, keypoint_descriptor(enc.keypoints, boxes))};
    g_l = concat(parts, 1);
  }
  const Var img = gather_image_context(params, kContextPrefix, enc.image_map, boxes, cfg.camera);
  SelfOutput fused = self_forward(params, g_l, img, cfg.self, train, noise_rng);
  return {detect_head(params, fused.fused, proposals), fused.aux_loss, fused.lidar_calls, fused.image_calls};
}

std::vector<Proposal> refined_proposals(const Tensor& head, std::span<const Proposal> proposals) {
  const std::vector<Detection> dets = decode_detections(head, proposals);
  std::vector<Proposal> out(proposals.begin(), proposals.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].box = dets[i].box;
    out[i].box.yaw = wrap_half_angle(dets[i].box.yaw);
  }
  return out;
}

std::vector<Proposal> initial_proposals(const ExperimentConfig& cfg, const RpnOutput& rpn,
                                        std::span<const std::size_t> forced_anchors, std::span<const Proposal> extra) {
  std::vector<Proposal> out = propose_rois(rpn, cfg.max_proposals, cfg.rpn);
  const Tensor& raw = rpn.raw.value();
  for (std::size_t a : forced_anchors) {
    const bool present = std::any_of(out.begin(), out.end(), [a](const Proposal& p) { return p.anchor == a; });
    if (present) continue;
    const double* row = raw.data() + a * kRpnOutputs;
    out.push_back({decode_box(rpn.anchors[a], std::span<const double>(row + 1, 8)), 1.0 / (1.0 + std::exp(-row[0])), a,
                   static_cast<ObjectClass>(a % kNumClasses)});
  }
  for (Proposal p : extra) {
    p.score = 1.0 / (1.0 + std::exp(-raw[p.anchor * kRpnOutputs]));
    out.push_back(p);
  }
  return out;
}

ModelOutput model_forward(BoundParams& params, const ExperimentConfig& cfg, const SyntheticScene& scene, bool train,
                          const Rng* noise_rng, std::span<const std::size_t> forced_anchors,
                          std::span<const Proposal> extra) {
  SceneEncoding enc = encode_scene(params, cfg, scene);
  ModelOutput out;
  out.proposals = initial_proposals(cfg, enc.rpn, forced_anchors, extra);
  HeadPass pass = head_pass(params, cfg, enc, out.proposals, train, noise_rng);
  out.rpn = enc.rpn;
  out.image_map = enc.image_map;
  out.head = pass.head;
  out.aux_loss = pass.aux_loss;
  out.lidar_calls = pass.lidar_calls;
  out.image_calls = pass.image_calls;
  return out;
}

std::vector<Detection> detect(const ParamStore& store, const ExperimentConfig& cfg, const SyntheticScene& scene) {
  Tape tape;
  BoundParams params(tape, store, false);
  const SceneEncoding enc = encode_scene(params, cfg, scene);
  std::vector<Proposal> proposals = initial_proposals(cfg, enc.rpn, {}, {});
  Tensor head = head_pass(params, cfg, enc, proposals, false, nullptr).head.value();
  for (std::size_t pass = 1; pass < cfg.refine_passes; ++pass) {
    proposals = refined_proposals(head, proposals);
    head = head_pass(params, cfg, enc, proposals, false, nullptr).head.value();
  }
  std::vector<Detection> raw = decode_detections(head, proposals);
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a].score > raw[b].score; });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    Detection d = raw[i];
    d.box.yaw = wrap_angle(d.box.yaw);
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.cls == d.cls && bev_iou(k.box, d.box) > kPostNmsIou;
    });
    if (!dup) kept.push_back(d);
  }
  return kept;
}

}  // namespace qicvt
