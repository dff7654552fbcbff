#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dr2n/rng.hpp"
#include "dr2n/tensor.hpp"

namespace dr2n {

/// Weight initialization: truncated normal (std 0.1, cut at 2 std) for
/// weights, zeros for biases.
constexpr double kWeightInitStd = 0.1;

/// Named collection of trainable tensors. Every lookup of a name returns a
/// handle to the same underlying tensor, so modules that share weights share
/// them by identity. Each entry carries a gradient multiplier that scales its
/// gradient at optimizer-step time and nowhere else.
class ParamStore {
public:
  /// New weight tensor, truncated-normal initialized.
  Tensor create_weight(const std::string& name, Shape shape, Rng& rng);
  /// New bias (or otherwise zero-initialized) tensor.
  Tensor create_zeros(const std::string& name, Shape shape);
  /// Register a tensor with explicit values.
  Tensor create(const std::string& name, Shape shape, Vec values);

  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;

  void set_grad_multiplier(const std::string& name, double m);
  double grad_multiplier(const std::string& name) const;
  /// Gradient as the optimizer sees it: multiplier times accumulated grad.
  Vec effective_grad(const std::string& name) const;

  /// Names in registration order (the deterministic iteration order).
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }
  Index total_values() const;

  void zero_grads();

private:
  struct Entry {
    Tensor tensor;
    double grad_multiplier = 1.0;
  };
  const Entry& entry(const std::string& name) const;

  std::vector<std::string> order_;
  std::unordered_map<std::string, Entry> entries_;
};

} // namespace dr2n
