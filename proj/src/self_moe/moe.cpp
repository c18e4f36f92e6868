#include "qicvt/self_moe/moe.hpp"

#include <numeric>

#include "qicvt/tensor/var_ops.hpp"

namespace qicvt {

namespace {

std::string expert_name(const std::string& prefix, std::size_t i) { return prefix + ".expert" + std::to_string(i); }

}  // namespace

std::size_t ExpertCallCounter::total() const { return std::accumulate(rows.begin(), rows.end(), std::size_t{0}); }

void init_moe(ParamStore& store, const std::string& prefix, const GateConfig& gate, const ExpertShape& shape, Rng& rng) {
  gate.validate();
  store.add(prefix + ".gate.w", glorot(rng, shape.in, gate.experts));
  store.add(prefix + ".gate.noise_w", Tensor(Shape{shape.in, gate.experts}));
  for (std::size_t i = 0; i < gate.experts; ++i) {
    const std::string e = expert_name(prefix, i);
    store.add(e + ".w1", glorot(rng, shape.in, shape.hidden));
    store.add(e + ".b1", Tensor(Shape{shape.hidden}));
    store.add(e + ".w2", glorot(rng, shape.hidden, shape.out));
    store.add(e + ".b2", Tensor(Shape{shape.out}));
  }
}

Var expert_forward(BoundParams& params, const std::string& prefix, std::size_t expert, const Var& x) {
  const std::string e = expert_name(prefix, expert);
  const Var h = gelu(add(matmul(x, params[e + ".w1"]), params[e + ".b1"]));
  return add(matmul(h, params[e + ".w2"]), params[e + ".b2"]);
}

MoeOutput moe_forward(BoundParams& params, const std::string& prefix, const Var& x, const GateConfig& gate,
                      const ExpertShape& shape, const Tensor* noise, bool train, ExpertCallCounter* counter,
                      const Selection* fixed) {
  gate.validate();
  if (x.shape().size() != 2 || x.shape()[1] != shape.in) {
    throw ShapeError(prefix + ": input " + shape_to_string(x.shape()) + " does not match expert width " +
                     std::to_string(shape.in));
  }
  const std::size_t m = x.shape()[0];
  const Var logits = gating_logits(x, params[prefix + ".gate.w"], params[prefix + ".gate.noise_w"], gate, noise, train);
  GateResult g = top_k_gate(logits, gate.k, fixed);

  std::vector<std::vector<std::size_t>> rows_of(gate.experts);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i : g.selection[r]) rows_of[i].push_back(r);
  }
  if (counter && counter->rows.size() < gate.experts) counter->rows.resize(gate.experts, 0);

  Var mixture = constant_like(x, Tensor(Shape{m, shape.out}));
  for (std::size_t i = 0; i < gate.experts; ++i) {
    const auto& rows = rows_of[i];
    if (rows.empty()) continue;
    if (counter) counter->rows[i] += rows.size();
    const Var y = expert_forward(params, prefix, i, gather_rows(x, rows));
    std::vector<std::pair<std::size_t, std::size_t>> entries;
    entries.reserve(rows.size());
    for (std::size_t r : rows) entries.push_back({r, i});
    const Var w = gather_entries(g.weights, std::move(entries));
    mixture = add(mixture, scatter_rows(scale_rows(y, w), rows, m));
  }
  return {mixture, std::move(g), logits};
}

}  // namespace qicvt
