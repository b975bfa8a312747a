#include "trgan/nn/params.hpp"

#include <cmath>
#include <cstring>

#include "trgan/errors.hpp"
#include "trgan/hash.hpp"

namespace trgan::nn {

Var ParamStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  auto v = leaf(std::move(init), true);
  entries_.emplace_back(name, v);
  return v;
}

const Var& ParamStore::get(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw ConfigError("unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second->value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.second->grad = Tensor();
}

void ParamStore::set_requires_grad(bool on) {
  for (auto& e : entries_) e.second->requires_grad = on;
}

void ParamStore::round_to_float() {
  for (auto& e : entries_) nn::round_to_float(e.second->value);
}

NamedTensors ParamStore::snapshot() const {
  NamedTensors out;
  for (const auto& [n, v] : entries_) out.emplace(n, v->value);
  return out;
}

void ParamStore::load(const NamedTensors& values) {
  if (values.size() != entries_.size()) {
    throw ShapeError("parameter count mismatch: expected " + std::to_string(entries_.size()) + ", got " +
                     std::to_string(values.size()));
  }
  for (auto& [n, v] : entries_) {
    auto it = values.find(n);
    if (it == values.end()) throw ShapeError("missing parameter " + n);
    if (it->second.shape() != v->value.shape()) {
      throw ShapeError("parameter " + n + " has shape " + shape_string(it->second.shape()) + ", expected " +
                       shape_string(v->value.shape()));
    }
    v->value = it->second;
  }
}

Tensor uniform_init(Shape shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.storage()) v = static_cast<double>(static_cast<float>(dist(rng)));
  return t;
}

std::uint64_t digest(const NamedTensors& params) {
  Fnv1a h;
  for (const auto& [name, t] : params) {
    h.update(name);
    for (int d : t.shape()) h.update_pod(static_cast<std::int32_t>(d));
    for (double v : t.values()) h.update_pod(static_cast<float>(v));
  }
  return h.value();
}

void RmsProp::step(ParamStore& params) {
  for (const auto& [name, p] : params.entries()) {
    if (p->grad.empty()) continue;
    auto& sq = sq_[name];
    if (sq.empty()) sq.assign(p->value.size(), 0.0);
    double* w = p->value.ptr();
    const double* g = p->grad.ptr();
    for (std::size_t i = 0; i < sq.size(); ++i) {
      sq[i] = alpha_ * sq[i] + (1.0 - alpha_) * g[i] * g[i];
      w[i] -= lr_ * g[i] / (std::sqrt(sq[i]) + eps_);
    }
  }
}

void Adam::step(ParamStore& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, p] : params.entries()) {
    if (p->grad.empty()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(p->value.size(), 0.0);
      v.assign(p->value.size(), 0.0);
    }
    double* w = p->value.ptr();
    const double* g = p->grad.ptr();
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace trgan::nn
