#include "qicvt/frontend/image_encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qicvt/tensor/conv.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

void init_image_encoder(ParamStore& store, const ImageEncoderConfig& cfg, Rng& rng) {
  const std::size_t widths[] = {3, cfg.width1, cfg.width2, cfg.out_channels};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string name = "image.conv" + std::to_string(i);
    store.add(name + ".w", normal_tensor(rng, {9 * widths[i], widths[i + 1]}, std::sqrt(2.0 / (9.0 * widths[i]))));
    store.add(name + ".b", Tensor(Shape{widths[i + 1]}));
  }
}

Var image_features(BoundParams& params, const Tensor& image, const ImageEncoderConfig& /*cfg*/) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("image must be (H, W, 3)");
  if (image.dim(0) % kImageStride != 0 || image.dim(1) % kImageStride != 0) {
    throw std::invalid_argument("image size " + shape_to_string(image.shape()) + " not divisible by 4");
  }
  Var x = params.tape().constant(image);
  x = relu(conv2d(x, params["image.conv0.w"], params["image.conv0.b"], 2));
  x = relu(conv2d(x, params["image.conv1.w"], params["image.conv1.b"], 2));
  return conv2d(x, params["image.conv2.w"], params["image.conv2.b"], 1);
}

}  // namespace qicvt
