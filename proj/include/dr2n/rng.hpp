#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dr2n {

/// FNV-1a over a byte string.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);

/// Pure derivation of a child seed from a base seed and a lane index.
/// Does not consume generator state, so (seed, lane) -> stream is stable.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t lane);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

/// Deterministic random source. Normal variates come from Box-Muller on
/// the raw 53-bit uniforms, so streams are reproducible across platforms
/// independent of the standard library's distribution internals.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1).
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi], inclusive, rejection-sampled (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal variate.
  double normal();
  /// Normal with the given stddev, resampled until within trunc_stds
  /// standard deviations of zero.
  double truncated_normal(double stddev, double trunc_stds = 2.0);
  /// Sample an index from a probability row (values sum to 1).
  int categorical(const double* probs, int n);

  std::uint64_t raw() { return gen_(); }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace dr2n
