#include "qicvt/self_moe/fusion.hpp"

#include <cstdlib>
#include <limits>

#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

namespace {

std::size_t mlp_params(std::size_t in, std::size_t hidden, std::size_t out) {
  return in * hidden + hidden + hidden * out + out;
}

std::size_t moe_params(const GateConfig& gate, const ExpertShape& e) {
  return 2 * e.in * gate.experts + gate.experts * mlp_params(e.in, e.hidden, e.out);
}

void add_mlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
             Rng& rng) {
  store.add(prefix + ".w1", glorot(rng, in, hidden));
  store.add(prefix + ".b1", Tensor(Shape{hidden}));
  store.add(prefix + ".w2", glorot(rng, hidden, out));
  store.add(prefix + ".b2", Tensor(Shape{out}));
}

Var mlp(BoundParams& params, const std::string& prefix, const Var& x) {
  const Var h = gelu(add(matmul(x, params[prefix + ".w1"]), params[prefix + ".b1"]));
  return add(matmul(h, params[prefix + ".w2"]), params[prefix + ".b2"]);
}

}  // namespace

std::size_t self_parameter_count(const SelfConfig& cfg) {
  if (!cfg.enabled) return mlp_params(cfg.lidar_in + cfg.image_in, matched_concat_hidden(cfg), cfg.fused);
  return moe_params(cfg.gate, cfg.lidar_experts()) + moe_params(cfg.gate, cfg.image_experts()) +
         mlp_params(2 * cfg.expert_out, cfg.fusion_hidden, cfg.fused);
}

std::size_t matched_concat_hidden(const SelfConfig& cfg) {
  SelfConfig on = cfg;
  on.enabled = true;
  const std::size_t target = self_parameter_count(on);
  std::size_t best = 1;
  long best_gap = std::numeric_limits<long>::max();
  for (std::size_t h = 1; h <= 4096; ++h) {
    const long gap = std::labs(static_cast<long>(mlp_params(cfg.lidar_in + cfg.image_in, h, cfg.fused)) -
                               static_cast<long>(target));
    if (gap < best_gap) best_gap = gap, best = h;
  }
  return best;
}

void init_self(ParamStore& store, const SelfConfig& cfg, Rng& rng) {
  if (!cfg.enabled) {
    add_mlp(store, "self.concat_mlp", cfg.lidar_in + cfg.image_in, matched_concat_hidden(cfg), cfg.fused, rng);
    return;
  }
  init_moe(store, "self.lidar", cfg.gate, cfg.lidar_experts(), rng);
  init_moe(store, "self.image", cfg.gate, cfg.image_experts(), rng);
  add_mlp(store, "self.fuse", 2 * cfg.expert_out, cfg.fusion_hidden, cfg.fused, rng);
}

Var fuse_local(BoundParams& params, const Var& y_l, const Var& y_i) {
  const Var parts[] = {y_l, y_i};
  return mlp(params, "self.fuse", concat(parts, 1));
}

SelfOutput self_forward(BoundParams& params, const Var& g_l, const Var& img, const SelfConfig& cfg, bool train,
                        const Rng* noise_rng, const SelfFixings& fixed) {
  SelfOutput out;
  if (!cfg.enabled) {
    const Var parts[] = {g_l, img};
    out.fused = mlp(params, "self.concat_mlp", concat(parts, 1));
    return out;
  }
  const std::size_t p = g_l.shape()[0];
  const bool need_noise = train && cfg.gate.noise;
  Tensor lidar_noise, image_noise;
  const Tensor* ln = fixed.lidar_noise;
  const Tensor* in = fixed.image_noise;
  if (need_noise && (!ln || !in)) {
    if (!noise_rng) throw std::invalid_argument("training SELF with gate noise needs an rng");
    // Separate streams per modality keep the two gates independent.
    if (!ln) lidar_noise = sample_gate_noise(noise_rng->derive(1), p, cfg.lidar_in, cfg.gate), ln = &lidar_noise;
    if (!in) image_noise = sample_gate_noise(noise_rng->derive(2), p, cfg.image_in, cfg.gate), in = &image_noise;
  }
  out.lidar = moe_forward(params, "self.lidar", g_l, cfg.gate, cfg.lidar_experts(), ln, train, &out.lidar_calls,
                          fixed.lidar_selection);
  out.image = moe_forward(params, "self.image", img, cfg.gate, cfg.image_experts(), in, train, &out.image_calls,
                          fixed.image_selection);
  out.fused = fuse_local(params, out.lidar->mixture, out.image->mixture);
  if (cfg.load_balance && p > 0) {
    out.aux_loss = add(load_balance_loss(out.lidar->gate.weights, cfg.load_balance_coeff),
                       load_balance_loss(out.image->gate.weights, cfg.load_balance_coeff));
  }
  return out;
}

}  // namespace qicvt
