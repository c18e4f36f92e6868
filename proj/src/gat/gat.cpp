#include "qicvt/gat/gat.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qicvt/tensor/kernels.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

namespace {

std::string block_prefix(const std::string& stream, std::size_t b) {
  return "gat." + stream + ".block" + std::to_string(b);
}

std::size_t even(std::size_t c) { return c + (c % 2); }

Shape token_shape(const Shape& s) {
  if (s.size() != 3 && s.size() != 4) throw ShapeError("tokenize expects a rank 3 or 4 map, got " + shape_to_string(s));
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) n *= s[i];
  return {n, s.back()};
}

}  // namespace

void GatConfig::validate() const {
  image_block().validate();
  voxel_block().validate();
  if (depth == 0) throw std::invalid_argument("GAT depth must be >= 1");
  if (image_tokens == 0 || voxel_tokens == 0 || align_dim == 0) throw std::invalid_argument("GAT sizes must be >= 1");
}

void init_gat(ParamStore& store, const GatConfig& cfg, Rng& rng, bool zero_residual) {
  cfg.validate();
  for (std::size_t b = 0; b < cfg.depth; ++b) {
    init_block(store, block_prefix("fwd", b), cfg.image_block(), rng, zero_residual);
    init_block(store, block_prefix("bwd", b), cfg.voxel_block(), rng, zero_residual);
  }
  store.add("gat.align.wq", glorot(rng, cfg.image_channels, cfg.align_dim));
  store.add("gat.align.wk", glorot(rng, cfg.voxel_channels, cfg.align_dim));
  store.add("gat.align.wv", glorot(rng, cfg.voxel_channels, cfg.voxel_channels));
  store.add("gat.align.pos_q", normal_tensor(rng, {cfg.image_tokens, cfg.align_dim}, 0.1));
  store.add("gat.align.pos_k", normal_tensor(rng, {cfg.voxel_tokens, cfg.align_dim}, 0.1));
  Tensor selector(Shape{cfg.image_channels + cfg.voxel_channels, cfg.image_channels});
  for (std::size_t c = 0; c < cfg.image_channels; ++c) selector.at(c, c) = 1.0;
  store.add("gat.fuse.w", std::move(selector));
  store.add("gat.fuse.b", Tensor(Shape{cfg.image_channels}));
}

Tensor tokenize(const Tensor& map) {
  const Shape ts = token_shape(map.shape());
  Tensor flat = map.reshaped(ts);
  if (ts[1] % 2 == 0) return flat;
  const Tensor parts[] = {flat, Tensor(Shape{ts[0], 1})};
  return concat(std::span<const Tensor>(parts), 1);
}

Var tokenize(const Var& map) {
  const Shape ts = token_shape(map.shape());
  Var flat = reshape(map, ts);
  if (ts[1] % 2 == 0) return flat;
  const Var parts[] = {flat, constant_like(map, Tensor(Shape{ts[0], 1}))};
  return concat(parts, 1);
}

Tensor detokenize(const Tensor& tokens, const Shape& shape) {
  const Shape ts = token_shape(shape);
  if (tokens.rank() != 2 || tokens.dim(0) != ts[0] || tokens.dim(1) != even(ts[1])) {
    throw ShapeError("tokens " + shape_to_string(tokens.shape()) + " do not match map " + shape_to_string(shape));
  }
  if (tokens.dim(1) == ts[1]) return tokens.reshaped(shape);
  const std::size_t sizes[] = {ts[1], 1};
  return split(tokens, std::span<const std::size_t>(sizes), 1)[0].reshaped(shape);
}

Var detokenize(const Var& tokens, const Shape& shape) {
  const Shape ts = token_shape(shape);
  if (tokens.shape().size() != 2 || tokens.shape()[0] != ts[0] || tokens.shape()[1] != even(ts[1])) {
    throw ShapeError("tokens " + shape_to_string(tokens.shape()) + " do not match map " + shape_to_string(shape));
  }
  if (tokens.shape()[1] == ts[1]) return reshape(tokens, shape);
  const std::size_t sizes[] = {ts[1], 1};
  return reshape(split(tokens, std::span<const std::size_t>(sizes), 1)[0], shape);
}

std::vector<BlockWeights<Var>> stream_weights(BoundParams& params, const std::string& stream, std::size_t depth) {
  std::vector<BlockWeights<Var>> out;
  for (std::size_t b = 0; b < depth; ++b) out.push_back(block_weights(params, block_prefix(stream, b)));
  return out;
}

std::vector<BlockWeights<Tensor>> stream_weights(const ParamStore& store, const std::string& stream, std::size_t depth) {
  std::vector<BlockWeights<Tensor>> out;
  for (std::size_t b = 0; b < depth; ++b) out.push_back(block_weights(store, block_prefix(stream, b)));
  return out;
}

Var forward_transform(BoundParams& params, const Var& g_i, const GatConfig& cfg) {
  const Var tokens = tokenize(g_i);
  if (tokens.shape()[1] != cfg.image_channels) throw ShapeError("image feature channels do not match GAT config");
  return rev_stack(stream_weights(params, "fwd", cfg.depth), tokens, cfg.image_block(), StackDirection::kForward,
                   cfg.recompute);
}

Var backward_transform(BoundParams& params, const Var& g_v, const GatConfig& cfg) {
  const Var tokens = tokenize(g_v);
  if (tokens.shape()[1] != cfg.voxel_channels) throw ShapeError("voxel feature channels do not match GAT config");
  return rev_stack(stream_weights(params, "bwd", cfg.depth), tokens, cfg.voxel_block(), StackDirection::kInverse,
                   cfg.recompute);
}

Var align_tokens(BoundParams& params, const Var& y_f, const Var& y_r, const GatConfig& cfg) {
  if (y_f.shape()[0] != cfg.image_tokens || y_r.shape()[0] != cfg.voxel_tokens) {
    throw ShapeError("token counts " + shape_to_string(y_f.shape()) + " / " + shape_to_string(y_r.shape()) +
                     " do not match GAT config");
  }
  const Var q = add(matmul(y_f, params["gat.align.wq"]), params["gat.align.pos_q"]);
  const Var k = add(matmul(y_r, params["gat.align.wk"]), params["gat.align.pos_k"]);
  const Var v = matmul(y_r, params["gat.align.wv"]);
  const Var weights = softmax(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(cfg.align_dim))));
  return matmul(weights, v);
}

Var fuse_global(BoundParams& params, const Var& y_f, const Var& y_r, const Shape& image_shape, const GatConfig& cfg) {
  const Var parts[] = {y_f, align_tokens(params, y_f, y_r, cfg)};
  const Var fused = add(matmul(concat(parts, 1), params["gat.fuse.w"]), params["gat.fuse.b"]);
  return detokenize(fused, image_shape);
}

Var gat_forward(BoundParams& params, const Var& g_i, const Var& g_v, const GatConfig& cfg) {
  const Var y_f = forward_transform(params, g_i, cfg);
  const Var y_r = backward_transform(params, g_v, cfg);
  return fuse_global(params, y_f, y_r, g_i.shape(), cfg);
}

}  // namespace qicvt
