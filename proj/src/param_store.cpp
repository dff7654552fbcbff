#include "dr2n/param_store.hpp"

#include "dr2n/errors.hpp"

namespace dr2n {

Tensor ParamStore::create_weight(const std::string& name, Shape shape, Rng& rng) {
  Vec v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v(i) = rng.truncated_normal(kWeightInitStd);
  return create(name, std::move(shape), std::move(v));
}

Tensor ParamStore::create_zeros(const std::string& name, Shape shape) {
  Vec v = Vec::Zero(shape_size(shape));
  return create(name, std::move(shape), std::move(v));
}

Tensor ParamStore::create(const std::string& name, Shape shape, Vec values) {
  if (entries_.count(name))
    throw ConfigError("ParamStore: duplicate parameter name '" + name + "'");
  Tensor t = Tensor::leaf(std::move(shape), std::move(values));
  entries_.emplace(name, Entry{t, 1.0});
  order_.push_back(name);
  return t;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw ConfigError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

Tensor ParamStore::get(const std::string& name) const { return entry(name).tensor; }

bool ParamStore::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

void ParamStore::set_grad_multiplier(const std::string& name, double m) {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw ConfigError("ParamStore: unknown parameter '" + name + "'");
  it->second.grad_multiplier = m;
}

double ParamStore::grad_multiplier(const std::string& name) const {
  return entry(name).grad_multiplier;
}

Vec ParamStore::effective_grad(const std::string& name) const {
  const Entry& e = entry(name);
  return e.grad_multiplier * e.tensor.grad();
}

Index ParamStore::total_values() const {
  Index n = 0;
  for (const auto& name : order_) n += entry(name).tensor.size();
  return n;
}

void ParamStore::zero_grads() {
  for (const auto& name : order_) entries_.at(name).tensor.zero_grad();
}

} // namespace dr2n
