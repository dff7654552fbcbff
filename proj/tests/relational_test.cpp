#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "dr2n/errors.hpp"
#include "dr2n/relational.hpp"
#include "gradcheck.hpp"

using namespace dr2n;
using dr2n::testing::finite_diff_check;
using dr2n::testing::projected_sum;

namespace {

Tensor random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  Vec v(r * c);
  for (Index i = 0; i < v.size(); ++i) v(i) = scale * rng.normal();
  return Tensor::leaf({r, c}, std::move(v));
}

RelationalParams make_params(ParamStore& store, Variant v, Index dh, Index de,
                             Rng& rng, Activation act = Activation::Tanh) {
  return RelationalParams::create(store, "rel", v, dh, de, act, rng);
}

// Identity-selecting edge weights: e_ij = h_i.
void set_edge_identity(RelationalParams& p) {
  auto& w = p.w_edge.values_mut();
  w.setZero();
  for (Index i = 0; i < p.hidden_dim; ++i) w(i * p.edge_dim + i) = 1.0;
  p.b_edge.values_mut().setZero();
}

} // namespace

TEST_CASE("single-node graph: one self pair, zero virtual node") {
  ParamStore store;
  Rng rng(11);
  auto p = make_params(store, Variant::Dr2n, 3, 3, rng);
  NodeSet nodes = NodeSet::all_valid(random_mat(1, 3, rng));
  Tensor e = edge_features(p, nodes);
  CHECK(e.shape() == Shape{1, 1, 3});
  EdgeAttention attn = attention_weights(p, e, nodes.mask);
  CHECK(attn.alpha.values().isZero());  // no admissible neighbor
  Tensor z = virtual_node(nodes, attn);
  CHECK(z.values().isZero());
}

TEST_CASE("edge_features rejects an empty node set") {
  ParamStore store;
  Rng rng(12);
  auto p = make_params(store, Variant::Dr2n, 3, 3, rng);
  NodeSet empty{Tensor(), BoolVec()};
  // a zero-row tensor cannot even be built; emptiness surfaces as ShapeError
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);
  (void)p;
  (void)empty;
}

TEST_CASE("projection edge weights make e_ij = h_i for every j") {
  ParamStore store;
  Rng rng(13);
  auto p = make_params(store, Variant::Dr2n, 4, 4, rng);
  set_edge_identity(p);
  NodeSet nodes = NodeSet::all_valid(random_mat(3, 4, rng));
  Tensor e = edge_features(p, nodes);
  auto H = nodes.h.matrix();
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index d = 0; d < 4; ++d)
        CHECK(e.values()((i * 3 + j) * 4 + d) == doctest::Approx(H(i, d)));
}

TEST_CASE("edge_features gradient wrt node features") {
  ParamStore store;
  Rng rng(14);
  auto p = make_params(store, Variant::Dr2n, 3, 2, rng);
  Tensor h = random_mat(4, 3, rng, 0.5);
  NodeSet nodes{h, BoolVec::Constant(4, true)};
  auto r = finite_diff_check(
      [&p, &nodes](const std::vector<Tensor>&) {
        return projected_sum(edge_features(p, nodes));
      },
      {h, p.w_edge, p.b_edge});
  CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("rn attention is exactly uniform over the other valid nodes") {
  ParamStore store;
  Rng rng(15);
  auto p = make_params(store, Variant::Rn, 3, 3, rng);
  NodeSet nodes = NodeSet::all_valid(random_mat(4, 3, rng));
  EdgeAttention attn =
      attention_weights(p, edge_features(p, nodes), nodes.mask);
  auto A = attn.alpha.matrix();
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      CHECK(A(i, j) == (i == j ? 0.0 : 1.0 / 3.0));
}

TEST_CASE("dr2n with zero attention weights degrades to uniform") {
  ParamStore store;
  Rng rng(16);
  auto p = make_params(store, Variant::Dr2n, 3, 3, rng);
  p.w_attn.values_mut().setZero();
  p.b_attn.values_mut().setZero();
  NodeSet nodes = NodeSet::all_valid(random_mat(5, 3, rng));
  EdgeAttention attn =
      attention_weights(p, edge_features(p, nodes), nodes.mask);
  auto A = attn.alpha.matrix();
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j)
      CHECK(A(i, j) == doctest::Approx(i == j ? 0.0 : 0.25).epsilon(1e-12));
}

TEST_CASE("dr2n row softmax over hand-set logits") {
  ParamStore store;
  Rng rng(17);
  auto p = make_params(store, Variant::Dr2n, 2, 1, rng);
  p.w_attn.values_mut().setConstant(1.0);  // logits == edge scalar
  p.b_attn.values_mut().setZero();
  // craft edges (3,3,1) directly; diagonal never consumed
  Vec e(9);
  e << -9, 1, 2, 0, -9, 0, 3, 1, -9;
  Tensor edges = Tensor::leaf({3, 3, 1}, e);
  BoolVec mask = BoolVec::Constant(3, true);
  EdgeAttention attn = attention_weights(p, edges, mask);
  auto A = attn.alpha.matrix();
  auto sm2 = [](double a, double b) {
    double m = std::max(a, b);
    double ea = std::exp(a - m), eb = std::exp(b - m);
    return std::pair{ea / (ea + eb), eb / (ea + eb)};
  };
  auto [a01, a02] = sm2(1, 2);
  CHECK(A(0, 1) == doctest::Approx(a01).epsilon(1e-12));
  CHECK(A(0, 2) == doctest::Approx(a02).epsilon(1e-12));
  CHECK(A(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(A(1, 2) == doctest::Approx(0.5).epsilon(1e-12));
  auto [a20, a21] = sm2(3, 1);
  CHECK(A(2, 0) == doctest::Approx(a20).epsilon(1e-12));
  CHECK(A(2, 1) == doctest::Approx(a21).epsilon(1e-12));
  for (Index i = 0; i < 3; ++i) {
    CHECK(A(i, i) == 0.0);
    CHECK(std::abs(A.row(i).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("virtual node: one-hot and uniform aggregation") {
  Rng rng(18);
  NodeSet nodes = NodeSet::all_valid(Tensor::from_matrix(
      (RowMat(2, 2) << 2, 0, 0, 4).finished()));
  SUBCASE("one-hot picks a single neighbor") {
    RowMat a(2, 2);
    a << 0, 1, 1, 0;
    EdgeAttention attn{Tensor::from_matrix(a), Tensor::zeros({2, 2})};
    Tensor z = virtual_node(nodes, attn);
    CHECK(z.matrix()(0, 1) == 4.0);
    CHECK(z.matrix()(1, 0) == 2.0);
  }
  SUBCASE("uniform over two neighbors averages them") {
    RowMat a(2, 2);
    a << 0.5, 0.5, 0.5, 0.5;
    EdgeAttention attn{Tensor::from_matrix(a), Tensor::zeros({2, 2})};
    Tensor z = virtual_node(nodes, attn);
    CHECK(z.matrix()(0, 0) == 1.0);
    CHECK(z.matrix()(0, 1) == 2.0);
  }
}

TEST_CASE("virtual node matches an explicit loop oracle") {
  Rng rng(19);
  const Index n = 5, d = 3;
  Tensor h = random_mat(n, d, rng);
  // random row-stochastic alpha
  RowMat a(n, n);
  for (Index i = 0; i < n; ++i) {
    double s = 0;
    for (Index j = 0; j < n; ++j) {
      a(i, j) = rng.uniform();
      s += a(i, j);
    }
    a.row(i) /= s;
  }
  NodeSet nodes = NodeSet::all_valid(h);
  EdgeAttention attn{Tensor::from_matrix(a), Tensor::zeros({n, n})};
  Tensor z = virtual_node(nodes, attn);
  auto H = h.matrix();
  for (Index i = 0; i < n; ++i)
    for (Index dd = 0; dd < d; ++dd) {
      double expect = 0;
      for (Index j = 0; j < n; ++j) expect += a(i, j) * H(j, dd);
      CHECK(std::abs(z.matrix()(i, dd) - expect) < 1e-12);
    }
}

TEST_CASE("dr2n node update with selector weights passes h through") {
  ParamStore store;
  Rng rng(20);
  auto p = make_params(store, Variant::Dr2n, 3, 3, rng, Activation::Identity);
  auto& w = p.w_node.values_mut();
  w.setZero();
  for (Index i = 0; i < 3; ++i) w(i * 3 + i) = 1.0;  // top block = identity
  p.b_node.values_mut().setZero();
  NodeSet nodes = NodeSet::all_valid(random_mat(4, 3, rng));
  NodeSet out = node_update(p, nodes, random_mat(4, 3, rng));
  CHECK(out.h.values().isApprox(nodes.h.values()));
}

TEST_CASE("gat node update ignores h_i once z is fixed") {
  ParamStore store;
  Rng rng(21);
  auto p = make_params(store, Variant::Gat, 3, 3, rng);
  Tensor z = random_mat(4, 3, rng);
  NodeSet a = NodeSet::all_valid(random_mat(4, 3, rng));
  NodeSet b = NodeSet::all_valid(random_mat(4, 3, rng));
  CHECK(node_update(p, a, z).h.values() == node_update(p, b, z).h.values());
}

TEST_CASE("full layer gradient vs finite differences, all variants") {
  for (Variant v : {Variant::Rn, Variant::Gat, Variant::Dr2n}) {
    ParamStore store;
    Rng rng(derive_seed(22, static_cast<std::uint64_t>(v)));
    auto p = make_params(store, v, 3, 2, rng);
    Tensor h = random_mat(4, 3, rng, 0.5);
    NodeSet nodes{h, BoolVec::Constant(4, true)};
    std::vector<Tensor> leaves = {h, p.w_edge, p.b_edge, p.w_node, p.b_node};
    if (v != Variant::Rn) {
      leaves.push_back(p.w_attn);
      leaves.push_back(p.b_attn);
    }
    auto r = finite_diff_check(
        [&p, &nodes](const std::vector<Tensor>&) {
          return projected_sum(relational_layer(p, nodes).h);
        },
        leaves);
    CAPTURE(to_string(v));
    CAPTURE(r.worst);
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("permutation equivariance of all three variants") {
  for (Variant v : {Variant::Rn, Variant::Gat, Variant::Dr2n}) {
    ParamStore store;
    Rng rng(derive_seed(23, static_cast<std::uint64_t>(v)));
    auto p = make_params(store, v, 4, 3, rng);
    const Index n = 6;
    Tensor h = random_mat(n, 4, rng);
    NodeSet nodes = NodeSet::all_valid(h);
    RowMat out = relational_layer(p, nodes).h.matrix();

    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng(99);
    for (Index i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[shuffle_rng.uniform_int(0, i)]);

    RowMat hp(n, 4);
    for (Index i = 0; i < n; ++i) hp.row(i) = h.matrix().row(perm[i]);
    NodeSet permuted = NodeSet::all_valid(Tensor::from_matrix(hp));
    RowMat out_p = relational_layer(p, permuted).h.matrix();
    for (Index i = 0; i < n; ++i)
      CHECK((out_p.row(i) - out.row(perm[i])).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("masked nodes never influence unmasked outputs") {
  for (Variant v : {Variant::Rn, Variant::Gat, Variant::Dr2n}) {
    ParamStore store;
    Rng rng(derive_seed(24, static_cast<std::uint64_t>(v)));
    auto p = make_params(store, v, 3, 3, rng);
    const Index n = 4;
    Tensor h = random_mat(n, 3, rng);
    NodeSet nodes = NodeSet::all_valid(h);
    RowMat base = relational_layer(p, nodes).h.matrix();

    // append a masked node with wild values
    RowMat hplus(n + 1, 3);
    hplus.topRows(n) = h.matrix();
    hplus.row(n).setConstant(1e6);
    BoolVec mask(n + 1);
    mask.head(n).setConstant(true);
    mask(n) = false;
    NodeSet padded{Tensor::from_matrix(hplus), mask};
    RowMat out = relational_layer(p, padded).h.matrix();
    CAPTURE(to_string(v));
    CHECK(out.topRows(n) == base);  // exact
  }
}

TEST_CASE("attention rows are stochastic over admissible entries") {
  ParamStore store;
  Rng rng(25);
  auto p = make_params(store, Variant::Dr2n, 3, 2, rng);
  const Index n = 7;
  Tensor h = random_mat(n, 3, rng, 2.0);
  BoolVec mask(n);
  for (Index i = 0; i < n; ++i) mask(i) = i != 3;
  NodeSet nodes{h, mask};
  EdgeAttention attn =
      attention_weights(p, edge_features(p, nodes), nodes.mask);
  auto A = attn.alpha.matrix();
  for (Index i = 0; i < n; ++i) {
    if (!mask(i)) continue;
    CHECK(std::abs(A.row(i).sum() - 1.0) < 1e-12);
    CHECK(A(i, i) == 0.0);
    CHECK(A(i, 3) == 0.0);
    for (Index j = 0; j < n; ++j) CHECK(A(i, j) >= 0.0);
  }
}
