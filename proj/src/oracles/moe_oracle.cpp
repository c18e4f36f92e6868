#include "qicvt/oracles/moe_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qicvt::oracle {

namespace {

double softplus_ref(double v) { return v > 30 ? v : std::log1p(std::exp(v)); }

double gelu_ref(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

// x (D) times w (D, N).
std::vector<double> affine(const Tensor& w, const Tensor* b, const std::vector<double>& x) {
  const std::size_t d = w.dim(0), n = w.dim(1);
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = b ? (*b)[j] : 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += x[i] * w[i * n + j];
    out[j] = acc;
  }
  return out;
}

}  // namespace

std::vector<double> gate_logits_scalar(const ParamStore& store, const std::string& prefix,
                                       const std::vector<double>& x, const GateConfig& cfg,
                                       const std::vector<double>* noise, bool train) {
  const Tensor& wg = store.get(prefix + ".gate.w");
  const bool noisy = train && cfg.noise;
  if (cfg.formula == GateFormula::kLiteral) {
    std::vector<double> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = softplus_ref(x[i] * (noisy ? (*noise)[i] : 1.0));
    return affine(wg, nullptr, s);
  }
  std::vector<double> logits = affine(wg, nullptr, x);
  if (noisy) {
    const auto spread = affine(store.get(prefix + ".gate.noise_w"), nullptr, x);
    for (std::size_t j = 0; j < logits.size(); ++j) logits[j] += (*noise)[j] * softplus_ref(spread[j]);
  }
  return logits;
}

std::vector<double> moe_dense(const ParamStore& store, const std::string& prefix, const std::vector<double>& x,
                              const GateConfig& cfg, const std::vector<double>* noise, bool train) {
  const auto logits = gate_logits_scalar(store, prefix, x, cfg, noise, train);
  const std::size_t n = logits.size();
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < n; ++i) ranked.push_back({-logits[i], i});
  std::sort(ranked.begin(), ranked.end());
  std::vector<double> masked(n, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < cfg.k; ++r) masked[ranked[r].second] = logits[ranked[r].second];
  const double top = -ranked[0].first;
  double z = 0;
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) z += weight[i] = std::exp(masked[i] - top);
  for (double& w : weight) w /= z;

  std::vector<double> out;
  for (std::size_t e = 0; e < n; ++e) {
    const std::string name = prefix + ".expert" + std::to_string(e);
    auto h = affine(store.get(name + ".w1"), &store.get(name + ".b1"), x);
    for (double& v : h) v = gelu_ref(v);
    const auto y = affine(store.get(name + ".w2"), &store.get(name + ".b2"), h);
    if (out.empty()) out.assign(y.size(), 0.0);
    for (std::size_t j = 0; j < y.size(); ++j) out[j] += weight[e] * y[j];
  }
  return out;
}

}  // namespace qicvt::oracle
