#include "qicvt/frontend/backbone.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qicvt/tensor/conv.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

namespace {

std::string stage_name(std::size_t s) { return "backbone.stage" + std::to_string(s); }

}  // namespace

void init_backbone(ParamStore& store, const BackboneConfig& cfg, Rng& rng) {
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t cin = cfg.widths[s], cout = cfg.widths[s + 1];
    // He-style scale keeps ReLU activations from shrinking stage over stage.
    store.add(stage_name(s) + ".w", normal_tensor(rng, {27 * cin, cout}, std::sqrt(2.0 / (27.0 * cin))));
    store.add(stage_name(s) + ".b", Tensor(Shape{cout}));
  }
}

Tensor normalized_input(const FeatureVolume& base) {
  if (base.channels() != 4) throw ShapeError("base volume must have 4 channels");
  const VoxelGridSpec& spec = base.spec;
  const double z_mid = spec.origin[2] + spec.voxel_size[2] * spec.extents[2] / 2;
  const double z_half = spec.voxel_size[2] * spec.extents[2] / 2;
  Tensor out(base.data.shape());
  for (std::size_t i = 0; i < spec.extents[0]; ++i) {
    for (std::size_t j = 0; j < spec.extents[1]; ++j) {
      for (std::size_t k = 0; k < spec.extents[2]; ++k) {
        const std::size_t v = spec.flat_index(i, j, k);
        if (!base.occupancy[v]) continue;
        const auto c = spec.voxel_center(i, j, k);
        out[v * 4 + 0] = (base.data[v * 4 + 0] - c[0]) / (spec.voxel_size[0] / 2);
        out[v * 4 + 1] = (base.data[v * 4 + 1] - c[1]) / (spec.voxel_size[1] / 2);
        out[v * 4 + 2] = (base.data[v * 4 + 2] - z_mid) / z_half;
        out[v * 4 + 3] = 0.5 + 0.5 * base.data[v * 4 + 3];
      }
    }
  }
  return out;
}

StageVolumes downsample_stages(BoundParams& params, const FeatureVolume& base, const BackboneConfig& cfg) {
  for (std::size_t e : base.spec.extents) {
    if (e % 8 != 0) {
      throw std::invalid_argument("grid extents must be divisible by 8, got " + std::to_string(e));
    }
  }
  if (base.channels() != cfg.widths[0]) throw ShapeError("base volume channels do not match backbone input width");
  StageVolumes out;
  Var x = params.tape().constant(normalized_input(base));
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t stride = s == 0 ? 1 : 2;
    x = relu(conv3d(x, params[stage_name(s) + ".w"], params[stage_name(s) + ".b"], stride));
    out.features[s] = x;
    out.specs[s] = base.spec.coarsened(kStageStrides[s]);
  }
  return out;
}

}  // namespace qicvt
