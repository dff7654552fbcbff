#include "dr2n/rng.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "dr2n/errors.hpp"

namespace dr2n {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t lane) {
  // splitmix64 finalizer over the pair; avalanches both inputs.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (lane + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  return derive_seed(base, fnv1a(tag));
}

double Rng::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ConfigError("uniform_int: empty range");
  const std::uint64_t n = static_cast<std::uint64_t>(hi - lo) + 1;
  if (n == 0) return static_cast<std::int64_t>(gen_());  // full 64-bit range
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % n);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::truncated_normal(double stddev, double trunc_stds) {
  double z;
  do {
    z = normal();
  } while (std::abs(z) > trunc_stds);
  return stddev * z;
}

int Rng::categorical(const double* probs, int n) {
  const double u = uniform();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return n - 1;  // guard against accumulated rounding
}

} // namespace dr2n
