#pragma once

#include <string>
#include <vector>

#include "qicvt/self_moe/gating.hpp"

namespace qicvt {

struct ExpertShape {
  std::size_t in = 32;
  std::size_t hidden = 32;
  std::size_t out = 32;
};

// Per-expert evaluation counts (rows pushed through each expert).
struct ExpertCallCounter {
  std::vector<std::size_t> rows;
  std::size_t total() const;
};

// Gate and experts under `prefix`: prefix.gate.w, prefix.gate.noise_w and
// prefix.expert{i}.{w1,b1,w2,b2}.
void init_moe(ParamStore& store, const std::string& prefix, const GateConfig& gate, const ExpertShape& shape, Rng& rng);

// One expert: in -> hidden (GELU) -> out.
Var expert_forward(BoundParams& params, const std::string& prefix, std::size_t expert, const Var& x);

struct MoeOutput {
  Var mixture;  // (m, out)
  GateResult gate;
  Var logits;
};

// y = sum_i w_i E_i(x) with w from top-k gating. Only the rows that selected
// expert i are pushed through it.
MoeOutput moe_forward(BoundParams& params, const std::string& prefix, const Var& x, const GateConfig& gate,
                      const ExpertShape& shape, const Tensor* noise, bool train, ExpertCallCounter* counter = nullptr,
                      const Selection* fixed = nullptr);

}  // namespace qicvt
