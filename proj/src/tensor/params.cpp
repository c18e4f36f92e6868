#include "qicvt/tensor/params.hpp"

#include <cmath>
#include <stdexcept>

namespace qicvt {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  auto [it, inserted] = params_.emplace(name, std::move(init));
  if (!inserted) throw std::invalid_argument("duplicate parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) {
    if (name.compare(0, prefix.size(), prefix) == 0) n += t.numel();
  }
  return n;
}

Var BoundParams::operator[](const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Var v = tape_.leaf(store_.get(name), trainable_);
  bound_.emplace(name, v);
  return v;
}

std::map<std::string, Tensor> BoundParams::collect(const Gradients& grads) const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : bound_) out.emplace(name, grads[v]);
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(Shape{fan_in, fan_out});
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

Tensor normal_tensor(Rng& rng, Shape shape, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

}  // namespace qicvt
