#pragma once

#include <string>

#include "dr2n/param_store.hpp"
#include "dr2n/tensor.hpp"

namespace dr2n {

/// Gated recurrent cell with one fused weight per gate acting on the
/// [state; input] concatenation. A single parameter set serves every actor
/// and every timestep; rows of the state matrix evolve independently.
struct GruCell {
  Index input_dim = 0;
  Index hidden_dim = 0;
  Tensor w_update, b_update;  // z = sigmoid([h; x] Wz + bz)
  Tensor w_reset, b_reset;    // r = sigmoid([h; x] Wr + br)
  Tensor w_cand, b_cand;      // c = tanh([r*h; x] Wc + bc)

  /// Registers fresh parameters under `prefix/` in the store.
  static GruCell create(ParamStore& store, const std::string& prefix,
                        Index input_dim, Index hidden_dim, Rng& rng);
  /// Binds to parameters already present in the store (checkpoint load).
  static GruCell attach(const ParamStore& store, const std::string& prefix,
                        Index input_dim, Index hidden_dim);

  /// One update for N actors at once: state (N x d_h), input (N x d_in),
  /// result (N x d_h). h' = (1 - z) * h + z * c.
  Tensor step(const Tensor& state, const Tensor& input) const;
};

/// Initial latent state is the per-actor feature vector itself, untouched.
/// Checks the width and hands the tensor through so downstream gradients
/// reach the features.
Tensor init_state(const Tensor& features, Index hidden_dim);

} // namespace dr2n
