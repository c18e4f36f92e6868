#pragma once

#include <optional>

#include "qicvt/self_moe/moe.hpp"

namespace qicvt {

struct SelfConfig {
  GateConfig gate;
  std::size_t lidar_in = 32;  // C_L (plus any auxiliary channels)
  std::size_t image_in = 16;  // C_I
  std::size_t expert_hidden = 32;
  std::size_t expert_out = 32;
  std::size_t fusion_hidden = 32;
  std::size_t fused = 32;  // C_F
  bool load_balance = false;
  double load_balance_coeff = 0.01;
  bool enabled = true;  // false: plain concat-MLP instead of the expert mixture

  ExpertShape lidar_experts() const { return {lidar_in, expert_hidden, expert_out}; }
  ExpertShape image_experts() const { return {image_in, expert_hidden, expert_out}; }
};

// Parameters under "self.*": self.lidar, self.image (gates + experts) and
// self.fuse, or self.concat_mlp when disabled.
void init_self(ParamStore& store, const SelfConfig& cfg, Rng& rng);

// Hidden width of the concat-MLP that brings its parameter count closest to
// the enabled SELF block's.
std::size_t matched_concat_hidden(const SelfConfig& cfg);
std::size_t self_parameter_count(const SelfConfig& cfg);

// y = F(y_L, y_I): concat -> linear -> GELU -> linear to C_F.
Var fuse_local(BoundParams& params, const Var& y_l, const Var& y_i);

// Pins the stochastic parts of one SELF evaluation.
struct SelfFixings {
  const Tensor* lidar_noise = nullptr;
  const Tensor* image_noise = nullptr;
  const Selection* lidar_selection = nullptr;
  const Selection* image_selection = nullptr;
};

struct SelfOutput {
  Var fused;  // (P, C_F)
  std::optional<MoeOutput> lidar, image;
  Var aux_loss;  // load balance term, or an invalid Var
  ExpertCallCounter lidar_calls, image_calls;
};

// g_l (P, lidar_in) and img (P, image_in). In training the gate noise is drawn
// from `noise_rng` (per proposal) unless fixed.
SelfOutput self_forward(BoundParams& params, const Var& g_l, const Var& img, const SelfConfig& cfg, bool train,
                        const Rng* noise_rng, const SelfFixings& fixed = {});

}  // namespace qicvt
