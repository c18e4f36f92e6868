#pragma once

#include "qicvt/tensor/params.hpp"

namespace qicvt {

struct ImageEncoderConfig {
  std::size_t width1 = 8;
  std::size_t width2 = 16;
  std::size_t out_channels = 16;  // C_I
};

inline constexpr std::size_t kImageStride = 4;

void init_image_encoder(ParamStore& store, const ImageEncoderConfig& cfg, Rng& rng);

// (H, W, 3) -> (H/4, W/4, C_I): 3x3 convs at strides 2, 2, 1 with ReLU after
// the first two. Throws std::invalid_argument unless H and W divide by 4.
Var image_features(BoundParams& params, const Tensor& image, const ImageEncoderConfig& cfg);

}  // namespace qicvt
