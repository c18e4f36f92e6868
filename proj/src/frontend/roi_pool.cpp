#include "qicvt/frontend/roi_pool.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

void init_roi_pool(ParamStore& store, const BackboneConfig& backbone, const RoiPoolConfig& cfg, Rng& rng) {
  std::size_t total = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    store.add("roi.empty" + std::to_string(s), normal_tensor(rng, {1, backbone.widths[s + 1]}, 0.1));
    total += backbone.widths[s + 1];
  }
  store.add("roi.proj.w", glorot(rng, total, cfg.out_channels));
  store.add("roi.proj.b", Tensor(Shape{cfg.out_channels}));
}

std::vector<std::size_t> voxels_in_box(const VoxelGridSpec& spec, const Box3& box, double margin) {
  const Box3 big = enlarged(box, 2 * margin * spec.voxel_size[0], 2 * margin * spec.voxel_size[1],
                            2 * margin * spec.voxel_size[2]);
  // Axis-aligned bounds of the enlarged box restrict the scan.
  double lo[3], hi[3];
  const double r = big.bev_diagonal() / 2;
  lo[0] = big.cx - r, hi[0] = big.cx + r;
  lo[1] = big.cy - r, hi[1] = big.cy + r;
  lo[2] = big.cz - big.h / 2, hi[2] = big.cz + big.h / 2;
  std::size_t first[3], last[3];
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((lo[a] - spec.origin[a]) / spec.voxel_size[a]);
    const double l = std::floor((hi[a] - spec.origin[a]) / spec.voxel_size[a]);
    const double top = static_cast<double>(spec.extents[a]) - 1;
    if (l < 0 || f > top) return {};
    first[a] = static_cast<std::size_t>(std::max(0.0, f));
    last[a] = static_cast<std::size_t>(std::min(top, l));
  }
  std::vector<std::size_t> out;
  for (std::size_t i = first[0]; i <= last[0]; ++i) {
    for (std::size_t j = first[1]; j <= last[1]; ++j) {
      for (std::size_t k = first[2]; k <= last[2]; ++k) {
        const auto c = spec.voxel_center(i, j, k);
        if (box_contains(big, c[0], c[1], c[2])) out.push_back(spec.flat_index(i, j, k));
      }
    }
  }
  return out;
}

Var roi_pool(BoundParams& params, const StageVolumes& volumes, std::span<const Box3> boxes, const RoiPoolConfig& cfg) {
  const std::size_t p = boxes.size();
  std::vector<Var> per_scale;
  for (std::size_t s = 0; s < 4; ++s) {
    const Var& vol = volumes.features[s];
    const Shape& shape = vol.shape();
    const std::size_t channels = shape[3];
    const Var flat = reshape(vol, {shape[0] * shape[1] * shape[2], channels});
    std::vector<RowPool> pools(p);
    Tensor empty_mask(Shape{p, 1});
    for (std::size_t b = 0; b < p; ++b) {
      const auto cells = voxels_in_box(volumes.specs[s], boxes[b], cfg.margin);
      if (cells.empty()) {
        empty_mask[b] = 1.0;
        continue;
      }
      const double w = 1.0 / static_cast<double>(cells.size());
      for (std::size_t c : cells) pools[b].push_back({c, w});
    }
    const Var pooled = pool_rows(flat, std::move(pools));
    const Var fill = matmul(constant_like(flat, std::move(empty_mask)), params["roi.empty" + std::to_string(s)]);
    per_scale.push_back(add(pooled, fill));
  }
  const Var joined = concat(per_scale, 1);
  return add(matmul(joined, params["roi.proj.w"]), params["roi.proj.b"]);
}

}  // namespace qicvt
