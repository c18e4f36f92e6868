#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "qicvt/frontend/backbone.hpp"
#include "qicvt/frontend/image_encoder.hpp"
#include "qicvt/frontend/keypoints.hpp"
#include "qicvt/frontend/pointcloud.hpp"
#include "qicvt/frontend/roi_pool.hpp"
#include "qicvt/frontend/rpn.hpp"
#include "qicvt/gat/gat.hpp"
#include "qicvt/metrics/metrics.hpp"
#include "qicvt/self_moe/detect_head.hpp"
#include "qicvt/self_moe/fusion.hpp"
#include "qicvt/self_moe/image_context.hpp"

namespace qicvt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::size_t train_scenes = 16;
  std::size_t val_scenes = 16;
  std::size_t min_objects = 1;
  std::size_t max_objects = 6;
  // Expected surface points on a box at reference_range; density falls as (reference_range / r)^2.
  double surface_density = 40;  // per m^2 of visible surface
  double reference_range = 5;
  std::size_t clutter_points = 200;
  std::size_t image_size = 32;
};

struct TrainConfig {
  std::size_t steps = 2000;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double clip_norm = 5.0;
  std::size_t warmup = 50;
  double rpn_weight = 1.0;
  double head_weight = 1.0;
  double box_weight = 1.0;  // head box/heading residual term, relative to the other head terms
  double box_beta = 1.0 / 9;  // smooth-L1 transition for box residuals
  double positive_iou = 0.25;  // BEV IoU for a head proposal to count as positive
  std::size_t jitter_proposals = 4;  // extra jittered GT proposals per object for the head
  std::size_t log_every = 1;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DataConfig data;
  VoxelGridSpec grid;
  BackboneConfig backbone;
  RpnConfig rpn;
  RoiPoolConfig roi;
  ImageEncoderConfig image;
  GatConfig gat;
  SelfConfig self;
  HeadConfig head;
  Camera camera;
  TrainConfig train;
  EvalConfig eval;
  bool gat_on = true;
  std::size_t max_proposals = 32;
  std::size_t refine_passes = 2;
  bool keypoints = false;  // optional FPS keypoint descriptor appended to the RoI feature
  std::size_t keypoint_count = 512;

  ExperimentConfig();
  // Fills derived widths (GAT token counts, SELF input widths) from the rest.
  void finalize();
  // Throws ConfigError naming the first violated precondition.
  void validate() const;
  // Canonical key = value text; parse_config(to_text()) reproduces the config.
  std::string to_text() const;
};

// Flat text: "key = value" lines with dotted keys, optional "[section]"
// headers that prefix the following keys, '#' comments. Unknown keys throw.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace qicvt
