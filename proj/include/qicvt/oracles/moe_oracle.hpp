#pragma once

#include <vector>

#include "qicvt/self_moe/gating.hpp"
#include "qicvt/tensor/params.hpp"

namespace qicvt::oracle {

// Scalar-loop gate logits for one input row.
std::vector<double> gate_logits_scalar(const ParamStore& store, const std::string& prefix,
                                       const std::vector<double>& x, const GateConfig& cfg,
                                       const std::vector<double>* noise, bool train);

// Dense mixture: every expert evaluated, weights from a masked softmax over
// the top-k logits (lowest index wins ties). One row at a time.
std::vector<double> moe_dense(const ParamStore& store, const std::string& prefix, const std::vector<double>& x,
                              const GateConfig& cfg, const std::vector<double>* noise, bool train);

}  // namespace qicvt::oracle
