#pragma once

#include <array>
#include <string>
#include <vector>

#include "qicvt/tensor/params.hpp"

namespace qicvt {

struct BlockShape {
  std::size_t channels = 16;  // C, split into two C/2 streams
  std::size_t heads = 4;      // must divide C/2
  std::size_t global_tokens = 4;
  double ln_eps = 1e-5;

  // Throws std::invalid_argument on odd C or heads not dividing C/2.
  void validate() const;
  std::size_t half() const { return channels / 2; }
};

enum BlockTensor : std::size_t {
  kLn1Gain,
  kLn1Bias,
  kQueryPoolW,  // (C/2, n_g * C/2)
  kQueryPoolB,
  kWq,
  kWk,
  kWv,
  kWo,  // zero at init
  kBo,
  kLn2Gain,
  kLn2Bias,
  kMlpW1,  // (C/2, 2 * C/2)
  kMlpB1,
  kMlpW2,  // zero at init
  kMlpB2,
  kBlockTensorCount
};

extern const std::array<const char*, kBlockTensorCount> kBlockTensorNames;

template <typename V>
using BlockWeights = std::array<V, kBlockTensorCount>;

// With zero_residual the output projections of both branches start at zero,
// which makes the block the identity.
void init_block(ParamStore& store, const std::string& prefix, const BlockShape& shape, Rng& rng,
                bool zero_residual = true);

BlockWeights<Tensor> block_weights(const ParamStore& store, const std::string& prefix);
BlockWeights<Var> block_weights(BoundParams& params, const std::string& prefix);
BlockWeights<TensorF> to_f32(const BlockWeights<Tensor>& w);

// Per-head attention maps from one attention call.
struct AttentionTrace {
  std::vector<Tensor> gather;      // (n_g, n): each row a distribution over tokens
  std::vector<Tensor> distribute;  // (n, n_g): each row a distribution over global tokens
};

// Global-query attention on already normalized tokens h (n, C/2). The tokens
// are mean-pooled and projected into n_g query tokens; each head gathers the
// values into the global tokens (softmax over tokens) and distributes them
// back (softmax over global tokens), followed by the output projection.
template <typename V>
V global_query_attention(const BlockWeights<V>& w, const V& h, const BlockShape& shape, AttentionTrace* trace = nullptr);

template <typename V>
V block_mlp(const BlockWeights<V>& w, const V& h);

// y1 = x1 + Attn(LN(x2)); y2 = x2 + MLP(LN(y1)).
template <typename V>
V reversible_block_forward(const BlockWeights<V>& w, const V& x, const BlockShape& shape,
                           AttentionTrace* trace = nullptr);

// x2 = y2 - MLP(LN(y1)); x1 = y1 - Attn(LN(x2)).
template <typename V>
V reversible_block_inverse(const BlockWeights<V>& w, const V& y, const BlockShape& shape,
                           AttentionTrace* trace = nullptr);

}  // namespace qicvt
