#pragma once

#include <array>
#include <span>
#include <vector>

#include "qicvt/frontend/rpn.hpp"

namespace qicvt {

// Raw head columns: 3 class logits, dcx dcy dcz dl dw dh, sin/cos of dyaw, confidence.
inline constexpr std::size_t kHeadClassCols = 0;
inline constexpr std::size_t kHeadBoxCols = 3;
inline constexpr std::size_t kHeadYawCols = 9;
inline constexpr std::size_t kHeadConfCol = 11;
inline constexpr std::size_t kHeadOutputs = 12;
inline constexpr std::size_t kProposalEncoding = 12;

struct HeadConfig {
  std::size_t in = 32;  // C_F
  std::size_t hidden = 64;
};

struct BoxResiduals {
  std::array<double, 6> d{};  // dcx, dcy, dcz (scaled by diagonal / height), dl, dw, dh (log scale)
  double dyaw = 0;
};

// Residuals that take `proposal` to `target`; the inverse of decode_residuals.
BoxResiduals encode_residuals(const Box3& proposal, const Box3& target);
Box3 decode_residuals(const Box3& proposal, const BoxResiduals& r);

// Fixed descriptor of a proposal fed next to the fused feature.
Tensor proposal_encoding(std::span<const Proposal> proposals);

void init_detect_head(ParamStore& store, const HeadConfig& cfg, Rng& rng);

// [fused, encoding] -> (P, kHeadOutputs).
Var detect_head(BoundParams& params, const Var& fused, std::span<const Proposal> proposals);

// Per row: argmax class, decoded box, sigmoid confidence.
std::vector<Detection> decode_detections(const Tensor& raw, std::span<const Proposal> proposals);

}  // namespace qicvt
