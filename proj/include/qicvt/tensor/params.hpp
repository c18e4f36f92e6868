#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>

#include "qicvt/tensor/autodiff.hpp"

namespace qicvt {

// Named trainable tensors. Iteration is in name order, which fixes the layout
// of checkpoints and the order of optimizer updates.
class ParamStore {
 public:
  // Throws std::invalid_argument on a duplicate name.
  Tensor& add(const std::string& name, Tensor init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const std::map<std::string, Tensor>& all() const noexcept { return params_; }
  std::map<std::string, Tensor>& all() noexcept { return params_; }

  // Total scalar count, optionally restricted to names starting with `prefix`.
  std::size_t scalar_count(const std::string& prefix = "") const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.params_ == b.params_; }

 private:
  std::map<std::string, Tensor> params_;
};

// Lazily places parameters on a tape the first time they are used, so a
// forward pass only pays for the parameters it touches.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store, bool trainable = true)
      : tape_(tape), store_(store), trainable_(trainable) {}

  Var operator[](const std::string& name);
  // Uses `v` for `name` instead of a fresh leaf; lets callers treat parameters
  // as ordinary graph inputs (gradient checks, for one).
  void set(const std::string& name, Var v) { bound_.insert_or_assign(name, v); }
  Tape& tape() noexcept { return tape_; }
  const ParamStore& store() const noexcept { return store_; }

  // Gradients of every bound parameter by name.
  std::map<std::string, Tensor> collect(const Gradients& grads) const;

 private:
  Tape& tape_;
  const ParamStore& store_;
  bool trainable_;
  std::unordered_map<std::string, Var> bound_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Seeded generator with cheap derivation of independent streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  Rng derive(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x51ed27))); }

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean = 0.0, double stddev = 1.0) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Glorot-uniform (fan_in, fan_out) matrix.
Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out);
Tensor normal_tensor(Rng& rng, Shape shape, double stddev);

}  // namespace qicvt
