#include "qicvt/gat/reversible_block.hpp"

#include <cmath>
#include <stdexcept>
#include <type_traits>

#include "qicvt/tensor/kernels.hpp"
#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

const std::array<const char*, kBlockTensorCount> kBlockTensorNames = {
    "ln1.gain", "ln1.bias", "query_pool.w", "query_pool.b", "attn.wq",  "attn.wk",  "attn.wv",  "attn.wo",
    "attn.bo",  "ln2.gain", "ln2.bias",     "mlp.w1",       "mlp.b1",   "mlp.w2",   "mlp.b2"};

void BlockShape::validate() const {
  if (channels == 0 || channels % 2 != 0) {
    throw std::invalid_argument("reversible block needs an even channel count, got " + std::to_string(channels));
  }
  if (heads == 0 || half() % heads != 0) {
    throw std::invalid_argument("head count " + std::to_string(heads) + " does not divide C/2 = " +
                                std::to_string(half()));
  }
  if (global_tokens == 0) throw std::invalid_argument("need at least one global query token");
}

void init_block(ParamStore& store, const std::string& prefix, const BlockShape& shape, Rng& rng, bool zero_residual) {
  shape.validate();
  const std::size_t d = shape.half();
  const auto put = [&](BlockTensor t, Tensor v) { store.add(prefix + "." + kBlockTensorNames[t], std::move(v)); };
  const auto residual = [&](std::size_t in, std::size_t out) {
    return zero_residual ? Tensor(Shape{in, out}) : glorot(rng, in, out);
  };
  put(kLn1Gain, Tensor(Shape{d}, 1.0));
  put(kLn1Bias, Tensor(Shape{d}));
  put(kQueryPoolW, glorot(rng, d, shape.global_tokens * d));
  put(kQueryPoolB, normal_tensor(rng, {shape.global_tokens * d}, 0.1));
  put(kWq, glorot(rng, d, d));
  put(kWk, glorot(rng, d, d));
  put(kWv, glorot(rng, d, d));
  put(kWo, residual(d, d));
  put(kBo, Tensor(Shape{d}));
  put(kLn2Gain, Tensor(Shape{d}, 1.0));
  put(kLn2Bias, Tensor(Shape{d}));
  put(kMlpW1, glorot(rng, d, 2 * d));
  put(kMlpB1, Tensor(Shape{2 * d}));
  put(kMlpW2, residual(2 * d, d));
  put(kMlpB2, Tensor(Shape{d}));
}

BlockWeights<Tensor> block_weights(const ParamStore& store, const std::string& prefix) {
  BlockWeights<Tensor> w;
  for (std::size_t i = 0; i < kBlockTensorCount; ++i) w[i] = store.get(prefix + "." + kBlockTensorNames[i]);
  return w;
}

BlockWeights<Var> block_weights(BoundParams& params, const std::string& prefix) {
  BlockWeights<Var> w;
  for (std::size_t i = 0; i < kBlockTensorCount; ++i) w[i] = params[prefix + "." + kBlockTensorNames[i]];
  return w;
}

BlockWeights<TensorF> to_f32(const BlockWeights<Tensor>& w) {
  BlockWeights<TensorF> out;
  for (std::size_t i = 0; i < kBlockTensorCount; ++i) out[i] = w[i].cast<float>();
  return out;
}

namespace {

template <typename V>
V scaled(const V& x, double f) {
  if constexpr (std::is_same_v<V, Var>) {
    return scale(x, f);
  } else {
    return scale(x, static_cast<typename V::value_type>(f));
  }
}

template <typename V>
Tensor value_of(const V& x) {
  if constexpr (std::is_same_v<V, Var>) {
    return x.value();
  } else {
    return x.template cast<double>();
  }
}

template <typename V>
std::vector<V> split_heads(const V& x, std::size_t heads) {
  const std::vector<std::size_t> sizes(heads, x.shape()[1] / heads);
  return split(x, std::span<const std::size_t>(sizes), 1);
}

template <typename V>
std::pair<V, V> halves(const V& x, const BlockShape& shape) {
  if (x.shape().size() != 2 || x.shape()[1] != shape.channels) {
    throw ShapeError("block input must be (n, " + std::to_string(shape.channels) + "), got " +
                     shape_to_string(x.shape()));
  }
  const std::size_t sizes[] = {shape.half(), shape.half()};
  auto parts = split(x, std::span<const std::size_t>(sizes), 1);
  return {parts[0], parts[1]};
}

template <typename V>
V join(const V& a, const V& b) {
  const V parts[] = {a, b};
  return concat(std::span<const V>(parts), 1);
}

}  // namespace

template <typename V>
V global_query_attention(const BlockWeights<V>& w, const V& h, const BlockShape& shape, AttentionTrace* trace) {
  const std::size_t d = shape.half();
  const std::size_t dh = d / shape.heads;
  const V pooled = mean_rows(h);
  const V queries = reshape(add(matmul(pooled, w[kQueryPoolW]), w[kQueryPoolB]), {shape.global_tokens, d});
  const auto q = split_heads(matmul(queries, w[kWq]), shape.heads);
  const auto k = split_heads(matmul(h, w[kWk]), shape.heads);
  const auto v = split_heads(matmul(h, w[kWv]), shape.heads);
  std::vector<V> out;
  out.reserve(shape.heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t i = 0; i < shape.heads; ++i) {
    const V scores = scaled(matmul(q[i], transpose(k[i])), inv_sqrt);  // (n_g, n)
    const V gather = softmax(scores);
    const V distribute = softmax(transpose(scores));  // (n, n_g)
    if (trace) {
      trace->gather.push_back(value_of(gather));
      trace->distribute.push_back(value_of(distribute));
    }
    out.push_back(matmul(distribute, matmul(gather, v[i])));
  }
  const V merged = shape.heads == 1 ? out[0] : concat(std::span<const V>(out), 1);
  return add(matmul(merged, w[kWo]), w[kBo]);
}

template <typename V>
V block_mlp(const BlockWeights<V>& w, const V& h) {
  return add(matmul(gelu(add(matmul(h, w[kMlpW1]), w[kMlpB1])), w[kMlpW2]), w[kMlpB2]);
}

template <typename V>
V reversible_block_forward(const BlockWeights<V>& w, const V& x, const BlockShape& shape, AttentionTrace* trace) {
  shape.validate();
  const auto [x1, x2] = halves(x, shape);
  const V y1 = add(x1, global_query_attention(w, layer_norm(x2, w[kLn1Gain], w[kLn1Bias], shape.ln_eps), shape, trace));
  const V y2 = add(x2, block_mlp(w, layer_norm(y1, w[kLn2Gain], w[kLn2Bias], shape.ln_eps)));
  return join(y1, y2);
}

template <typename V>
V reversible_block_inverse(const BlockWeights<V>& w, const V& y, const BlockShape& shape, AttentionTrace* trace) {
  shape.validate();
  const auto [y1, y2] = halves(y, shape);
  const V x2 = sub(y2, block_mlp(w, layer_norm(y1, w[kLn2Gain], w[kLn2Bias], shape.ln_eps)));
  const V x1 = sub(y1, global_query_attention(w, layer_norm(x2, w[kLn1Gain], w[kLn1Bias], shape.ln_eps), shape, trace));
  return join(x1, x2);
}

#define QICVT_INSTANTIATE_BLOCK(V)                                                                        \
  template V global_query_attention<V>(const BlockWeights<V>&, const V&, const BlockShape&, AttentionTrace*); \
  template V block_mlp<V>(const BlockWeights<V>&, const V&);                                             \
  template V reversible_block_forward<V>(const BlockWeights<V>&, const V&, const BlockShape&, AttentionTrace*); \
  template V reversible_block_inverse<V>(const BlockWeights<V>&, const V&, const BlockShape&, AttentionTrace*);

QICVT_INSTANTIATE_BLOCK(Tensor)
QICVT_INSTANTIATE_BLOCK(TensorF)
QICVT_INSTANTIATE_BLOCK(Var)

#undef QICVT_INSTANTIATE_BLOCK

}  // namespace qicvt
