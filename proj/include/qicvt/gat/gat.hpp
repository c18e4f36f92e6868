#pragma once

#include "qicvt/gat/rev_stack.hpp"

namespace qicvt {

struct GatConfig {
  std::size_t image_channels = 16;  // C_I
  std::size_t image_tokens = 64;    // H_I * W_I
  std::size_t voxel_channels = 16;  // after even padding
  std::size_t voxel_tokens = 256;
  std::size_t depth = 2;  // blocks per stream
  std::size_t heads = 4;
  std::size_t global_tokens = 4;
  std::size_t align_dim = 16;
  double ln_eps = 1e-5;
  bool recompute = true;

  BlockShape image_block() const { return {image_channels, heads, global_tokens, ln_eps}; }
  BlockShape voxel_block() const { return {voxel_channels, heads, global_tokens, ln_eps}; }
  void validate() const;
};

// Parameters under "gat.*". The fusion projection starts as the selector
// [I; 0] so that, with the zero residual init, G_VI == G_I.
void init_gat(ParamStore& store, const GatConfig& cfg, Rng& rng, bool zero_residual = true);

// Flattens (H, W, C) or (U, V, W, C) to (n, C), appending one zero channel
// when C is odd. detokenize drops any padding and restores `shape`.
Tensor tokenize(const Tensor& map);
Var tokenize(const Var& map);
Tensor detokenize(const Tensor& tokens, const Shape& shape);
Var detokenize(const Var& tokens, const Shape& shape);

std::vector<BlockWeights<Var>> stream_weights(BoundParams& params, const std::string& stream, std::size_t depth);
std::vector<BlockWeights<Tensor>> stream_weights(const ParamStore& store, const std::string& stream, std::size_t depth);

// Y_f: the forward block stack over the image tokens.
Var forward_transform(BoundParams& params, const Var& g_i, const GatConfig& cfg);
// Y_r: the inverse pass of the voxel block stack over the voxel tokens.
Var backward_transform(BoundParams& params, const Var& g_v, const GatConfig& cfg);

// Cross-attention pooling of Y_r onto the image token positions.
Var align_tokens(BoundParams& params, const Var& y_f, const Var& y_r, const GatConfig& cfg);

// G_VI = G(Y_f (+) align(Y_r)), reshaped to image_shape.
Var fuse_global(BoundParams& params, const Var& y_f, const Var& y_r, const Shape& image_shape, const GatConfig& cfg);

Var gat_forward(BoundParams& params, const Var& g_i, const Var& g_v, const GatConfig& cfg);

}  // namespace qicvt
