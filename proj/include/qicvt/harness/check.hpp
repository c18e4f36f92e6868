#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qicvt {

// Each measure_* runs one invariant suite with a fixed seed and reports the
// raw numbers; run_checks applies the pass thresholds.

struct ReversibilityResult {
  double worst64 = 0, worst32 = 0;  // max abs error of inverse(forward(x)) and forward(inverse(x))
};
// With inject_fault the inverse sees a slightly perturbed bias.
ReversibilityResult measure_reversibility(std::size_t cases, std::uint64_t seed, bool inject_fault = false);

// max |G_VI - G_I| with the default GAT at initialization.
double measure_identity_at_init(std::size_t cases, std::uint64_t seed);

struct GatingResult {
  double worst_sum_error = 0;
  std::size_t bad_support = 0;  // rows without exactly k nonzeros (or a negative weight)
  std::size_t bad_calls = 0;    // cases where expert calls != k per input row
};
GatingResult measure_gating(std::size_t cases, std::uint64_t seed);

// max |moe_forward - dense masked sum|.
double measure_moe_oracle(std::size_t cases, std::uint64_t seed);

// Worst relative error of a loss through GAT then SELF against central differences.
double measure_gradients(std::size_t configs, std::uint64_t seed);

// Clouds where fps disagrees with the brute-force selection.
std::size_t measure_fps_oracle(std::size_t clouds, std::uint64_t seed);

struct MetricsOracleResult {
  double worst_diff = 0;         // AP, APH and mAPH against the exhaustive oracle
  std::size_t aph_above_ap = 0;  // cells with APH > AP
  bool thresholds_ok = false;    // an IoU-0.6 match counts for PED/CYC only
};
MetricsOracleResult measure_metrics_oracle(std::size_t fixtures, std::uint64_t seed);

struct SuiteResult {
  std::string name;
  bool passed = false;
  double seconds = 0;
  std::string detail;
};

struct CheckOptions {
  bool inject_fault = false;
};

std::vector<SuiteResult> run_checks(const CheckOptions& options = {});

}  // namespace qicvt
