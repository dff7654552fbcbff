#pragma once

// Central finite-difference oracle for gradient verification. Lives in test
// code only; the recorded backward pass must never feed it.

#include <functional>
#include <string>
#include <vector>

#include "dr2n/tensor.hpp"

namespace dr2n::testing {

struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst;  // "leaf#k[i]" of the worst element
  bool ok(double tol) const { return max_rel_err < tol; }
};

/// Compares analytic gradients of f against central differences for every
/// element of every leaf. f must rebuild its graph from the given leaves on
/// each call. Relative error uses a unit floor so that near-zero gradients
/// are compared absolutely.
inline GradCheck finite_diff_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& leaves, double step = 1e-5) {
  for (const auto& t : leaves) t.zero_grad();
  Tensor loss = f(leaves);
  loss.backward();

  GradCheck r;
  for (size_t k = 0; k < leaves.size(); ++k) {
    const Tensor& leaf = leaves[k];
    Vec analytic = leaf.grad();
    Vec& x = const_cast<Tensor&>(leaf).values_mut();
    for (Index i = 0; i < x.size(); ++i) {
      const double saved = x(i);
      x(i) = saved + step;
      const double up = f(leaves).scalar_value();
      x(i) = saved - step;
      const double down = f(leaves).scalar_value();
      x(i) = saved;
      const double fd = (up - down) / (2.0 * step);
      const double denom = std::max({1.0, std::abs(fd), std::abs(analytic(i))});
      const double rel = std::abs(fd - analytic(i)) / denom;
      if (rel > r.max_rel_err) {
        r.max_rel_err = rel;
        r.worst = "leaf#" + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

/// Loss reducer that weights every output element with a fixed pseudo-random
/// projection, so misrouted gradients cannot cancel the way plain sum can
/// hide them.
inline Tensor projected_sum(const Tensor& t, std::uint64_t salt = 17) {
  Vec w(t.size());
  std::uint64_t s = 0x9e3779b97f4a7c15ull * (salt + 1);
  for (Index i = 0; i < t.size(); ++i) {
    s ^= s >> 12;
    s ^= s << 25;
    s ^= s >> 27;
    w(i) = 0.25 + static_cast<double>((s * 0x2545f4914f6cdd1dull) >> 40) /
                      static_cast<double>(1ull << 24);
  }
  return sum(mul(t, Tensor::leaf(t.shape(), w)));
}

} // namespace dr2n::testing
