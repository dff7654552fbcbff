#include "dr2n/relational.hpp"

#include "dr2n/errors.hpp"

namespace dr2n {

Variant parse_variant(const std::string& s) {
  if (s == "single-head") return Variant::SingleHead;
  if (s == "multi-head") return Variant::MultiHead;
  if (s == "gru") return Variant::Gru;
  if (s == "rn") return Variant::Rn;
  if (s == "gat") return Variant::Gat;
  if (s == "dr2n") return Variant::Dr2n;
  throw ConfigError("unknown variant '" + s +
                    "' (expected single-head|multi-head|gru|rn|gat|dr2n)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::SingleHead: return "single-head";
    case Variant::MultiHead: return "multi-head";
    case Variant::Gru: return "gru";
    case Variant::Rn: return "rn";
    case Variant::Gat: return "gat";
    case Variant::Dr2n: return "dr2n";
  }
  return "?";
}

bool is_relational(Variant v) {
  return v == Variant::Rn || v == Variant::Gat || v == Variant::Dr2n;
}

bool is_recurrent(Variant v) { return v == Variant::Gru || is_relational(v); }

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Tensor apply_activation(const Tensor& t, Activation a) {
  switch (a) {
    case Activation::Tanh: return tanh(t);
    case Activation::Relu: return relu(t);
    case Activation::Identity: return t;
  }
  throw std::logic_error("unreachable");
}

NodeSet NodeSet::all_valid(Tensor h) {
  BoolVec mask = BoolVec::Constant(h.rows(), true);
  return NodeSet{std::move(h), std::move(mask)};
}

RelationalParams RelationalParams::create(ParamStore& store,
                                          const std::string& prefix,
                                          Variant variant, Index hidden_dim,
                                          Index edge_dim,
                                          Activation node_activation, Rng& rng) {
  if (!is_relational(variant))
    throw ConfigError("relational layer: variant " + to_string(variant) +
                      " has no relational parameters");
  RelationalParams p;
  p.variant = variant;
  p.node_activation = node_activation;
  p.hidden_dim = hidden_dim;
  p.edge_dim = edge_dim;
  p.w_edge = store.create_weight(prefix + "/edge_w", {2 * hidden_dim, edge_dim}, rng);
  p.b_edge = store.create_zeros(prefix + "/edge_b", {1, edge_dim});
  if (variant != Variant::Rn) {
    p.w_attn = store.create_weight(prefix + "/attn_w", {edge_dim, 1}, rng);
    p.b_attn = store.create_zeros(prefix + "/attn_b", {1, 1});
  }
  const Index node_in = variant == Variant::Gat ? hidden_dim : 2 * hidden_dim;
  p.w_node = store.create_weight(prefix + "/node_w", {node_in, hidden_dim}, rng);
  p.b_node = store.create_zeros(prefix + "/node_b", {1, hidden_dim});
  return p;
}

RelationalParams RelationalParams::attach(const ParamStore& store,
                                          const std::string& prefix,
                                          Variant variant, Index hidden_dim,
                                          Index edge_dim,
                                          Activation node_activation) {
  RelationalParams p;
  p.variant = variant;
  p.node_activation = node_activation;
  p.hidden_dim = hidden_dim;
  p.edge_dim = edge_dim;
  p.w_edge = store.get(prefix + "/edge_w");
  p.b_edge = store.get(prefix + "/edge_b");
  if (variant != Variant::Rn) {
    p.w_attn = store.get(prefix + "/attn_w");
    p.b_attn = store.get(prefix + "/attn_b");
  }
  p.w_node = store.get(prefix + "/node_w");
  p.b_node = store.get(prefix + "/node_b");
  return p;
}

Tensor edge_features(const RelationalParams& p, const NodeSet& nodes) {
  const Index n = nodes.count();
  if (n < 1) throw ShapeError("edge_features: empty node set");
  if (nodes.h.cols() != p.hidden_dim)
    throw ShapeError("edge_features: node width " + shape_str(nodes.h.shape()) +
                     " does not match layer width " +
                     std::to_string(p.hidden_dim));
  // Row i*N + j of the pair matrix is [h_i; h_j].
  Tensor hi = repeat_each_row(nodes.h, n);
  Tensor hj = repeat_rows(nodes.h, n);
  Tensor pairs = concat(hi, hj, 1);
  Tensor e = add_row_broadcast(matmul(pairs, p.w_edge), p.b_edge);
  return reshape(e, {n, n, p.edge_dim});
}

namespace {

BoolMat admissible_pairs(const BoolVec& mask, Variant variant) {
  const Index n = mask.size();
  const bool include_self = variant == Variant::Gat;
  BoolMat adm(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      adm(i, j) = mask(i) && mask(j) && (include_self || i != j);
  return adm;
}

} // namespace

EdgeAttention attention_weights(const RelationalParams& p, const Tensor& edges,
                                const BoolVec& mask) {
  if (edges.rank() != 3 || edges.shape()[0] != edges.shape()[1])
    throw ShapeError("attention_weights: expected edges of shape (N, N, d_e), got " +
                     shape_str(edges.shape()));
  const Index n = edges.shape()[0];
  const Index de = edges.shape()[2];
  if (mask.size() != n)
    throw ShapeError("attention_weights: mask length " +
                     std::to_string(mask.size()) + " vs " + std::to_string(n) +
                     " nodes");
  const BoolMat adm = admissible_pairs(mask, p.variant);

  if (p.variant == Variant::Rn) {
    // Equal weight over every admissible neighbor; no learned logits.
    RowMat alpha = RowMat::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      Index deg = 0;
      for (Index j = 0; j < n; ++j) deg += adm(i, j) ? 1 : 0;
      if (deg == 0) continue;  // zero virtual node downstream
      for (Index j = 0; j < n; ++j)
        if (adm(i, j)) alpha(i, j) = 1.0 / static_cast<double>(deg);
    }
    return EdgeAttention{Tensor::from_matrix(alpha), Tensor::zeros({n, n})};
  }

  Tensor flat = reshape(edges, {n * n, de});
  Tensor logits = reshape(add_row_broadcast(matmul(flat, p.w_attn), p.b_attn),
                          {n, n});
  Tensor alpha = row_softmax(logits, adm, /*zero_empty_rows=*/true);
  return EdgeAttention{alpha, logits};
}

Tensor virtual_node(const NodeSet& nodes, const EdgeAttention& attn) {
  return weighted_neighbor_sum(attn.alpha, nodes.h, nodes.mask);
}

NodeSet node_update(const RelationalParams& p, const NodeSet& nodes,
                    const Tensor& z) {
  Tensor in = p.variant == Variant::Gat ? z : concat(nodes.h, z, 1);
  Tensor out = apply_activation(
      add_row_broadcast(matmul(in, p.w_node), p.b_node), p.node_activation);
  return NodeSet{out, nodes.mask};
}

NodeSet relational_layer(const RelationalParams& p, const NodeSet& nodes,
                         EdgeAttention* captured) {
  Tensor edges = edge_features(p, nodes);
  EdgeAttention attn = attention_weights(p, edges, nodes.mask);
  Tensor z = virtual_node(nodes, attn);
  if (captured) *captured = attn;
  return node_update(p, nodes, z);
}

} // namespace dr2n
