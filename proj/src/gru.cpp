#include "dr2n/gru.hpp"

#include "dr2n/errors.hpp"

namespace dr2n {

GruCell GruCell::create(ParamStore& store, const std::string& prefix,
                        Index input_dim, Index hidden_dim, Rng& rng) {
  GruCell c;
  c.input_dim = input_dim;
  c.hidden_dim = hidden_dim;
  const Index fused = hidden_dim + input_dim;
  c.w_update = store.create_weight(prefix + "/w_update", {fused, hidden_dim}, rng);
  c.b_update = store.create_zeros(prefix + "/b_update", {1, hidden_dim});
  c.w_reset = store.create_weight(prefix + "/w_reset", {fused, hidden_dim}, rng);
  c.b_reset = store.create_zeros(prefix + "/b_reset", {1, hidden_dim});
  c.w_cand = store.create_weight(prefix + "/w_cand", {fused, hidden_dim}, rng);
  c.b_cand = store.create_zeros(prefix + "/b_cand", {1, hidden_dim});
  return c;
}

GruCell GruCell::attach(const ParamStore& store, const std::string& prefix,
                        Index input_dim, Index hidden_dim) {
  GruCell c;
  c.input_dim = input_dim;
  c.hidden_dim = hidden_dim;
  c.w_update = store.get(prefix + "/w_update");
  c.b_update = store.get(prefix + "/b_update");
  c.w_reset = store.get(prefix + "/w_reset");
  c.b_reset = store.get(prefix + "/b_reset");
  c.w_cand = store.get(prefix + "/w_cand");
  c.b_cand = store.get(prefix + "/b_cand");
  return c;
}

Tensor GruCell::step(const Tensor& state, const Tensor& input) const {
  if (state.rank() != 2 || state.cols() != hidden_dim)
    throw ShapeError("gru_step: state shape " + shape_str(state.shape()) +
                     " does not match hidden size " + std::to_string(hidden_dim));
  if (input.rank() != 2 || input.cols() != input_dim ||
      input.rows() != state.rows())
    throw ShapeError("gru_step: input shape " + shape_str(input.shape()) +
                     " incompatible with state " + shape_str(state.shape()) +
                     " and input size " + std::to_string(input_dim));

  Tensor hx = concat(state, input, 1);
  Tensor z = sigmoid(add_row_broadcast(matmul(hx, w_update), b_update));
  Tensor r = sigmoid(add_row_broadcast(matmul(hx, w_reset), b_reset));
  Tensor rhx = concat(mul(r, state), input, 1);
  Tensor cand = tanh(add_row_broadcast(matmul(rhx, w_cand), b_cand));
  // h' = (1 - z) * h + z * cand
  return add(state, mul(z, sub(cand, state)));
}

Tensor init_state(const Tensor& features, Index hidden_dim) {
  if (features.rank() != 2 || features.cols() != hidden_dim)
    throw ShapeError("init_state: feature shape " + shape_str(features.shape()) +
                     " does not match hidden size " + std::to_string(hidden_dim));
  return features;
}

} // namespace dr2n
