#pragma once

#include "qicvt/tensor/autodiff.hpp"

namespace qicvt {

// Dense 3x3x3 convolution, zero padding 1, over a channels-last volume
// (U, V, W, C_in). Weight is (27 * C_in, C_out) with the kernel offset as the
// slow index; bias is (C_out). Output extents are (e - 1) / stride + 1.
// All-zero input sites are skipped, so sparse occupancy costs less.
Var conv3d(const Var& input, const Var& weight, const Var& bias, std::size_t stride);

// 3x3 convolution over a channels-last image (H, W, C_in); weight (9 * C_in, C_out).
Var conv2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride);

}  // namespace qicvt
