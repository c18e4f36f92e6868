#include "qicvt/harness/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "qicvt/tensor/losses.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

std::vector<std::optional<std::size_t>> assign_anchors(const ExperimentConfig& cfg, std::span<const GroundTruthBox> gts) {
  const VoxelGridSpec s4 = cfg.grid.coarsened(kStageStrides[2]);
  std::vector<std::optional<std::size_t>> out(gts.size());
  std::vector<bool> taken(s4.extents[0] * s4.extents[1] * kNumClasses, false);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const auto flat = s4.locate(gts[g].box.cx, gts[g].box.cy, s4.origin[2]);
    if (!flat) continue;
    const std::size_t cell = *flat / s4.extents[2];
    const std::size_t a = cell * kNumClasses + static_cast<std::size_t>(gts[g].cls);
    if (taken[a]) continue;
    taken[a] = true;
    out[g] = a;
  }
  return out;
}

SceneLoss scene_loss(BoundParams& params, const ExperimentConfig& cfg, const SyntheticScene& scene,
                     const Rng& noise_rng) {
  const auto anchors_of = assign_anchors(cfg, scene.gts);
  std::vector<std::size_t> forced;
  std::vector<Proposal> jittered;
  Rng jitter = noise_rng.derive(0x717);
  for (std::size_t g = 0; g < scene.gts.size(); ++g) {
    if (!anchors_of[g]) continue;
    forced.push_back(*anchors_of[g]);
    for (std::size_t j = 0; j < cfg.train.jitter_proposals; ++j) {
      // Mimic RPN output: axis-only yaw, metre-scale offsets.
      Box3 b = scene.gts[g].box;
      b.cx += jitter.normal(0, 0.4);
      b.cy += jitter.normal(0, 0.4);
      b.cz += jitter.normal(0, 0.1);
      b.l *= std::exp(jitter.normal(0, 0.1));
      b.w *= std::exp(jitter.normal(0, 0.1));
      b.h *= std::exp(jitter.normal(0, 0.1));
      b.yaw = wrap_half_angle(b.yaw + jitter.normal(0, 0.15));
      jittered.push_back({b, 0, *anchors_of[g], static_cast<ObjectClass>(*anchors_of[g] % kNumClasses)});
    }
  }
  const ModelOutput m = model_forward(params, cfg, scene, true, &noise_rng, forced, jittered);
  SceneLoss out;

  // RPN.
  const std::size_t n_anchor = m.rpn.anchors.size();
  const std::size_t rpn_cols[] = {1, kRpnOutputs - 1};
  const auto rpn_parts = split(m.rpn.raw, rpn_cols, 1);
  Tensor obj_target(Shape{n_anchor, 1});
  std::vector<std::size_t> pos_rows;
  std::vector<double> reg_target;
  for (std::size_t g = 0; g < scene.gts.size(); ++g) {
    if (!anchors_of[g]) continue;
    const std::size_t a = *anchors_of[g];
    obj_target[a] = 1;
    pos_rows.push_back(a);
    const auto t = encode_box(m.rpn.anchors[a], scene.gts[g].box);
    reg_target.insert(reg_target.end(), t.begin(), t.end());
  }
  const double n_pos = std::max<double>(1, static_cast<double>(pos_rows.size()));
  Var rpn_obj = scale(sigmoid_focal(rpn_parts[0], obj_target), 1.0 / n_pos);
  Var total = scale(rpn_obj, cfg.train.rpn_weight);
  out.parts.rpn_obj = rpn_obj.value()[0];
  if (!pos_rows.empty()) {
    const std::size_t np = pos_rows.size();
    Var rpn_box = scale(smooth_l1(gather_rows(rpn_parts[1], pos_rows), Tensor(Shape{np, kRpnOutputs - 1}, reg_target), 1.0 / 9),
                        1.0 / n_pos);
    out.parts.rpn_box = rpn_box.value()[0];
    total = add(total, scale(rpn_box, cfg.train.rpn_weight));
  }

  // Head: each proposal takes its best BEV-overlap GT; its own anchor's GT always counts.
  const std::size_t P = m.proposals.size();
  Tensor conf_target(Shape{P, 1});
  std::vector<std::size_t> head_pos, labels;
  std::vector<double> box_target;
  for (std::size_t i = 0; i < P; ++i) {
    const Proposal& p = m.proposals[i];
    std::optional<std::size_t> best;
    double best_iou = cfg.train.positive_iou;
    for (std::size_t g = 0; g < scene.gts.size(); ++g) {
      if (anchors_of[g] && *anchors_of[g] == p.anchor) {
        best = g;
        break;
      }
      const double iou = bev_iou(p.box, scene.gts[g].box);
      if (iou >= best_iou) best = g, best_iou = iou;
    }
    if (!best) continue;
    conf_target[i] = 1;
    head_pos.push_back(i);
    labels.push_back(static_cast<std::size_t>(scene.gts[*best].cls));
    const BoxResiduals r = encode_residuals(p.box, scene.gts[*best].box);
    box_target.insert(box_target.end(), r.d.begin(), r.d.end());
    box_target.push_back(std::sin(r.dyaw));
    box_target.push_back(std::cos(r.dyaw));
  }
  const std::size_t head_cols[] = {3, 8, 1};
  const auto head_parts = split(m.head, head_cols, 1);
  Var conf = scale(binary_cross_entropy_with_logits(head_parts[2], conf_target), 1.0 / std::max<double>(1, P));
  out.parts.head_conf = conf.value()[0];
  total = add(total, scale(conf, cfg.train.head_weight));
  if (!head_pos.empty()) {
    const double k = 1.0 / static_cast<double>(head_pos.size());
    Var cls = scale(softmax_cross_entropy(gather_rows(head_parts[0], head_pos), labels), k);
    Var box = scale(smooth_l1(gather_rows(head_parts[1], head_pos), Tensor(Shape{head_pos.size(), 8}, box_target),
                              cfg.train.box_beta),
                    k * cfg.train.box_weight);
    out.parts.head_cls = cls.value()[0];
    out.parts.head_box = box.value()[0];
    total = add(total, scale(add(cls, box), cfg.train.head_weight));
  }
  if (m.aux_loss.valid()) {
    out.parts.aux = m.aux_loss.value()[0];
    total = add(total, m.aux_loss);
  }
  out.parts.total = total.value()[0];
  out.total = total;
  return out;
}

TrainResult train_model(const ExperimentConfig& cfg, const std::vector<SyntheticScene>& scenes,
                        const std::function<void(const LossRecord&)>& on_step) {
  return train_model(cfg, init_model(cfg), scenes, on_step);
}

TrainResult train_model(const ExperimentConfig& cfg, ParamStore init, const std::vector<SyntheticScene>& scenes,
                        const std::function<void(const LossRecord&)>& on_step) {
  cfg.validate();
  if (scenes.empty()) throw std::invalid_argument("training needs at least one scene");
  TrainResult result{std::move(init), {}};
  ParamStore& store = result.params;
  std::map<std::string, Tensor> velocity;
  for (const auto& [name, t] : store.all()) velocity.emplace(name, Tensor(t.shape()));
  const Rng root(cfg.seed);
  std::vector<std::size_t> order(scenes.size());
  for (std::size_t step = 0; step < cfg.train.steps; ++step) {
    const std::size_t epoch = step / scenes.size(), pos = step % scenes.size();
    if (pos == 0) {
      std::iota(order.begin(), order.end(), 0);
      Rng shuffle = root.derive(8).derive(epoch);
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);
    }
    Tape tape;
    BoundParams params(tape, store);
    SceneLoss loss = scene_loss(params, cfg, scenes[order[pos]], root.derive(7).derive(step));
    LossRecord rec = loss.parts;
    rec.step = step;
    if (!std::isfinite(rec.total)) {
      throw TrainingDiverged("non-finite loss at step " + std::to_string(step) + " (rpn_obj " + std::to_string(rec.rpn_obj) +
                             ", rpn_box " + std::to_string(rec.rpn_box) + ", head_cls " + std::to_string(rec.head_cls) +
                             ", head_box " + std::to_string(rec.head_box) + ", head_conf " +
                             std::to_string(rec.head_conf) + ")");
    }
    const auto grads = params.collect(tape.backward(loss.total));
    double sq = 0;
    for (const auto& [name, g] : grads) {
      for (double v : g.values()) sq += v * v;
    }
    rec.grad_norm = std::sqrt(sq);
    if (!std::isfinite(rec.grad_norm)) throw TrainingDiverged("non-finite gradient at step " + std::to_string(step));
    const double clip = rec.grad_norm > cfg.train.clip_norm ? cfg.train.clip_norm / rec.grad_norm : 1.0;
    const double warm = cfg.train.warmup == 0 ? 1.0 : std::min(1.0, static_cast<double>(step + 1) / cfg.train.warmup);
    const double progress = static_cast<double>(step) / static_cast<double>(cfg.train.steps);
    rec.lr = cfg.train.lr * warm * (0.05 + 0.95 * 0.5 * (1 + std::cos(kPi * progress)));
    for (const auto& [name, g] : grads) {
      Tensor& w = store.get(name);
      Tensor& v = velocity.at(name);
      for (std::size_t i = 0; i < w.numel(); ++i) {
        v[i] = cfg.train.momentum * v[i] + clip * g[i] + cfg.train.weight_decay * w[i];
        w[i] -= rec.lr * v[i];
      }
    }
    result.curve.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

void write_loss_curve(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << "step,total,rpn_obj,rpn_box,head_cls,head_box,head_conf,aux,lr,grad_norm\n" << std::setprecision(9);
  for (const auto& r : curve) {
    os << r.step << ',' << r.total << ',' << r.rpn_obj << ',' << r.rpn_box << ',' << r.head_cls << ',' << r.head_box
       << ',' << r.head_conf << ',' << r.aux << ',' << r.lr << ',' << r.grad_norm << '\n';
  }
}

}  // namespace qicvt
