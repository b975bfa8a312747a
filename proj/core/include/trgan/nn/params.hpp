#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "trgan/nn/autograd.hpp"

namespace trgan::nn {

/// Name-ordered parameter snapshot; the unit persisted in checkpoints.
using NamedTensors = std::map<std::string, Tensor>;

/// Ordered collection of trainable leaves, addressed by dotted names.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t count() const;  // total scalar count

  void zero_grad();
  void set_requires_grad(bool on);
  /// Rounds every parameter to binary32 so checkpoints are lossless.
  void round_to_float();

  NamedTensors snapshot() const;
  /// Replaces values; names and shapes must match exactly.
  void load(const NamedTensors& values);

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_init(Shape shape, int fan_in, std::mt19937_64& rng);

/// FNV-1a over the binary32 image of every parameter, in name order.
std::uint64_t digest(const NamedTensors& params);

class RmsProp {
 public:
  explicit RmsProp(double lr, double alpha = 0.99, double eps = 1e-8) : lr_(lr), alpha_(alpha), eps_(eps) {}
  void step(ParamStore& params);

 private:
  double lr_, alpha_, eps_;
  std::map<std::string, std::vector<double>> sq_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamStore& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace trgan::nn
