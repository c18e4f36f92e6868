#include "qicvt/self_moe/detect_head.hpp"

#include <algorithm>
#include <cmath>

#include "qicvt/tensor/kernels.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

namespace {

constexpr double kMaxLogScale = 3.0;

}  // namespace

BoxResiduals encode_residuals(const Box3& p, const Box3& t) {
  // centre offset in the proposal frame, so the head never has to rotate
  const double diag = p.bev_diagonal();
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  const double dx = t.cx - p.cx, dy = t.cy - p.cy;
  BoxResiduals r;
  r.d = {(c * dx + s * dy) / diag, (-s * dx + c * dy) / diag, (t.cz - p.cz) / p.h,
         std::log(t.l / p.l),  std::log(t.w / p.w),  std::log(t.h / p.h)};
  r.dyaw = wrap_angle(t.yaw - p.yaw);
  return r;
}

Box3 decode_residuals(const Box3& p, const BoxResiduals& r) {
  const double diag = p.bev_diagonal();
  const auto grow = [](double base, double d) { return base * std::exp(std::clamp(d, -kMaxLogScale, kMaxLogScale)); };
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  const double du = r.d[0] * diag, dv = r.d[1] * diag;
  return {p.cx + c * du - s * dv, p.cy + s * du + c * dv, p.cz + r.d[2] * p.h, grow(p.l, r.d[3]),
          grow(p.w, r.d[4]),    grow(p.h, r.d[5]),    wrap_angle(p.yaw + r.dyaw)};
}

Tensor proposal_encoding(std::span<const Proposal> proposals) {
  Tensor out(Shape{proposals.size(), kProposalEncoding});
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const Box3& b = proposals[i].box;
    double* row = out.data() + i * kProposalEncoding;
    row[0] = b.cx / 10.0;
    row[1] = b.cy / 10.0;
    row[2] = b.cz;
    row[3] = std::log(b.l);
    row[4] = std::log(b.w);
    row[5] = std::log(b.h);
    row[6] = std::sin(2 * b.yaw);
    row[7] = std::cos(2 * b.yaw);
    row[8] = proposals[i].score;
    row[9 + static_cast<std::size_t>(proposals[i].anchor_class)] = 1.0;
  }
  return out;
}

void init_detect_head(ParamStore& store, const HeadConfig& cfg, Rng& rng) {
  store.add("head.fc1.w", glorot(rng, cfg.in + kProposalEncoding, cfg.hidden));
  store.add("head.fc1.b", Tensor(Shape{cfg.hidden}));
  store.add("head.fc2.w", normal_tensor(rng, {cfg.hidden, kHeadOutputs}, 0.01));
  Tensor bias(Shape{kHeadOutputs});
  bias[kHeadYawCols + 1] = 1.0;  // cos(dyaw) starts positive: no flip
  store.add("head.fc2.b", std::move(bias));
}

Var detect_head(BoundParams& params, const Var& fused, std::span<const Proposal> proposals) {
  const Var parts[] = {fused, constant_like(fused, proposal_encoding(proposals))};
  const Var h = relu(add(matmul(concat(parts, 1), params["head.fc1.w"]), params["head.fc1.b"]));
  return add(matmul(h, params["head.fc2.w"]), params["head.fc2.b"]);
}

std::vector<Detection> decode_detections(const Tensor& raw, std::span<const Proposal> proposals) {
  std::vector<Detection> out(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const double* row = raw.data() + i * kHeadOutputs;
    const std::size_t cls = static_cast<std::size_t>(std::max_element(row, row + 3) - row);
    BoxResiduals r;
    std::copy(row + kHeadBoxCols, row + kHeadBoxCols + 6, r.d.begin());
    r.dyaw = std::atan2(row[kHeadYawCols], row[kHeadYawCols + 1]);
    out[i] = {decode_residuals(proposals[i].box, r), static_cast<ObjectClass>(cls), scalar::sigmoid(row[kHeadConfCol])};
  }
  return out;
}

}  // namespace qicvt
