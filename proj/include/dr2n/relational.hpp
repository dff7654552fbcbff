#pragma once

#include <string>

#include "dr2n/param_store.hpp"
#include "dr2n/tensor.hpp"

namespace dr2n {

/// Model family. The first two are non-recurrent per-step heads; the last
/// three share the GRU trunk and differ only in the relational layer.
enum class Variant { SingleHead, MultiHead, Gru, Rn, Gat, Dr2n };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
bool is_relational(Variant v);  // rn | gat | dr2n
bool is_recurrent(Variant v);   // gru | rn | gat | dr2n

enum class Activation { Tanh, Relu, Identity };
Activation parse_activation(const std::string& s);
std::string to_string(Activation a);
Tensor apply_activation(const Tensor& t, Activation a);

/// Graph state at one rollout step: per-node latent rows plus a validity
/// mask. Masked rows never influence any unmasked output.
struct NodeSet {
  Tensor h;      // N x d_h
  BoolVec mask;  // N

  Index count() const { return h.rows(); }
  static NodeSet all_valid(Tensor h);
};

/// Attention over node pairs: alpha holds the aggregation weights, logits
/// the pre-softmax scores. Each valid row of alpha sums to one over its
/// admissible columns; inadmissible entries are exactly zero.
struct EdgeAttention {
  Tensor alpha;   // N x N
  Tensor logits;  // N x N (zeros for the uniform variant)
};

/// Parameters of one relational layer. The edge and attention transforms
/// are single fully-connected layers; the node transform is a single
/// fully-connected layer followed by `node_activation`.
struct RelationalParams {
  Variant variant = Variant::Dr2n;
  Activation node_activation = Activation::Tanh;
  Index hidden_dim = 0;  // d_h
  Index edge_dim = 0;    // d_e

  Tensor w_edge, b_edge;  // (2 d_h, d_e), (1, d_e)
  Tensor w_attn, b_attn;  // (d_e, 1), (1, 1)
  Tensor w_node, b_node;  // (2 d_h, d_h) for rn/dr2n, (d_h, d_h) for gat

  static RelationalParams create(ParamStore& store, const std::string& prefix,
                                 Variant variant, Index hidden_dim,
                                 Index edge_dim, Activation node_activation,
                                 Rng& rng);
  static RelationalParams attach(const ParamStore& store,
                                 const std::string& prefix, Variant variant,
                                 Index hidden_dim, Index edge_dim,
                                 Activation node_activation);
};

/// Pairwise edge states e_ij from the concatenated endpoint features;
/// result shape (N, N, d_e). e_ij and e_ji differ in general.
Tensor edge_features(const RelationalParams& p, const NodeSet& nodes);

/// Aggregation weights per variant. dr2n: learned scalar logits row-softmaxed
/// over valid j != i. rn: exactly uniform over valid j != i. gat: learned
/// softmax over valid j including i. A valid row with no admissible neighbor
/// (single-node graph) gets an all-zero row, which downstream turns into a
/// zero virtual node.
EdgeAttention attention_weights(const RelationalParams& p, const Tensor& edges,
                                const BoolVec& mask);

/// Virtual node per row: z_i = sum_j alpha_ij h_j.
Tensor virtual_node(const NodeSet& nodes, const EdgeAttention& attn);

/// Node refresh. rn/dr2n: f_node([h_i; z_i]); gat: f_node(z_i).
NodeSet node_update(const RelationalParams& p, const NodeSet& nodes,
                    const Tensor& z);

/// Full layer: edges -> attention -> virtual nodes -> refresh. Optionally
/// exposes the attention used (for inspection and export).
NodeSet relational_layer(const RelationalParams& p, const NodeSet& nodes,
                         EdgeAttention* captured = nullptr);

} // namespace dr2n
