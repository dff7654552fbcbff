#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dr2n/errors.hpp"
#include "dr2n/param_store.hpp"
#include "dr2n/rng.hpp"
#include "dr2n/tensor.hpp"
#include "gradcheck.hpp"

using namespace dr2n;
using dr2n::testing::finite_diff_check;
using dr2n::testing::projected_sum;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Vec v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v(i) = scale * rng.normal();
  return Tensor::leaf(std::move(shape), std::move(v));
}

} // namespace

TEST_CASE("matmul identity passes rhs through") {
  RowMat id(2, 2), b(2, 2);
  id << 1, 0, 0, 1;
  b << 3, 4, 5, 6;
  Tensor c = matmul(Tensor::from_matrix(id), Tensor::from_matrix(b));
  CHECK(c.matrix() == b);
}

TEST_CASE("matmul hand expansion") {
  RowMat a(1, 2), b(2, 1);
  a << 1, 2;
  b << 3, 4;
  Tensor c = matmul(Tensor::from_matrix(a), Tensor::from_matrix(b));
  CHECK(c.scalar_value() == 11.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions, naming both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 5});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("(2, 3)") != std::string::npos);
    CHECK(msg.find("(4, 5)") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences on random 3x4 * 4x2") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(11, seed));
    auto leaves = std::vector<Tensor>{random_tensor({3, 4}, rng),
                                      random_tensor({4, 2}, rng)};
    auto r = finite_diff_check(
        [](const std::vector<Tensor>& in) { return sum(matmul(in[0], in[1])); },
        leaves);
    CAPTURE(seed);
    CAPTURE(r.worst);
    CHECK(r.max_rel_err < 1e-6);
  }
}

TEST_CASE("concat of rank-1 tensors") {
  Tensor a = Tensor::from_vector((Vec(2) << 1, 2).finished());
  Tensor b = Tensor::from_vector((Vec(1) << 3).finished());
  Tensor c = concat(a, b, 0);
  REQUIRE(c.shape() == Shape{3});
  CHECK(c.values()(0) == 1);
  CHECK(c.values()(1) == 2);
  CHECK(c.values()(2) == 3);
}

TEST_CASE("backward of sum over concat routes ones to both inputs") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 2});
  sum(concat(a, b, 1)).backward();
  CHECK(a.grad().isApprox(Vec::Ones(6)));
  CHECK(b.grad().isApprox(Vec::Ones(4)));
}

TEST_CASE("concat gradient matches finite differences on random shapes") {
  Rng shapes(99);
  for (int trial = 0; trial < 6; ++trial) {
    Rng rng(derive_seed(21, trial));
    const Index r = shapes.uniform_int(1, 4);
    const Index c1 = shapes.uniform_int(1, 4), c2 = shapes.uniform_int(1, 4);
    const int axis = trial % 2;
    std::vector<Tensor> leaves;
    if (axis == 1) {
      leaves = {random_tensor({r, c1}, rng), random_tensor({r, c2}, rng)};
    } else {
      leaves = {random_tensor({c1, r}, rng), random_tensor({c2, r}, rng)};
    }
    auto res = finite_diff_check(
        [axis](const std::vector<Tensor>& in) {
          return projected_sum(concat(in[0], in[1], axis));
        },
        leaves);
    CAPTURE(trial);
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("concat rejects ragged non-axis dimensions") {
  CHECK_THROWS_AS(concat(Tensor::zeros({2, 3}), Tensor::zeros({3, 3}), 1),
                  ShapeError);
  CHECK_THROWS_AS(concat(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}), 2),
                  ShapeError);
}

TEST_CASE("softmax of equal logits is uniform") {
  Tensor y = softmax(Tensor::from_vector(Vec::Zero(3)));
  for (Index i = 0; i < 3; ++i)
    CHECK(y.values()(i) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(std::abs(y.values().sum() - 1.0) < 1e-12);
}

TEST_CASE("softmax is shift invariant") {
  for (double c : {-1000.0, -3.0, 0.0, 7.5, 1000.0}) {
    Vec base(2);
    base << c, c + std::log(2.0);
    Tensor y = softmax(Tensor::from_vector(base));
    CHECK(std::abs(y.values()(0) - 1.0 / 3) < 1e-12);
    CHECK(std::abs(y.values()(1) - 2.0 / 3) < 1e-12);
  }
}

TEST_CASE("masked softmax zeroes masked entries and renormalizes") {
  Vec logits(3);
  logits << 5, 1, 1;
  BoolVec mask(3);
  mask << true, false, true;
  Tensor y = softmax(Tensor::from_vector(logits), mask);
  const double sigma = std::exp(5.0) / (std::exp(5.0) + std::exp(1.0));
  CHECK(y.values()(0) == doctest::Approx(sigma).epsilon(1e-14));
  CHECK(y.values()(1) == 0.0);
  CHECK(y.values()(2) == doctest::Approx(1.0 - sigma).epsilon(1e-14));
}

TEST_CASE("softmax with everything masked is a degenerate-attention error") {
  BoolVec mask = BoolVec::Constant(3, false);
  CHECK_THROWS_AS(softmax(Tensor::from_vector(Vec::Zero(3)), mask),
                  DegenerateAttentionError);
}

TEST_CASE("softmax gradient matches finite differences, mask respected") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(31, seed));
    auto leaves = std::vector<Tensor>{random_tensor({6}, rng, 2.0)};
    BoolVec mask(6);
    for (Index i = 0; i < 6; ++i) mask(i) = rng.uniform() < 0.7;
    if (!mask.any()) mask(0) = true;
    auto r = finite_diff_check(
        [&mask](const std::vector<Tensor>& in) {
          return projected_sum(softmax(in[0], mask));
        },
        leaves);
    CHECK(r.max_rel_err < 1e-6);
    // masked entries keep zero gradient
    Vec g = leaves[0].grad();
    for (Index i = 0; i < 6; ++i)
      if (!mask(i)) CHECK(g(i) == 0.0);
  }
}

TEST_CASE("row_softmax zeroes inadmissible rows when asked") {
  Tensor logits = Tensor::constant({2, 2}, 3.0);
  BoolMat adm(2, 2);
  adm << false, false, true, true;
  Tensor y = row_softmax(logits, adm, true);
  CHECK(y.values()(0) == 0.0);
  CHECK(y.values()(1) == 0.0);
  CHECK(y.values()(2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(row_softmax(logits, adm, false), DegenerateAttentionError);
}

TEST_CASE("elementwise point values") {
  CHECK(sigmoid(Tensor::scalar(0.0)).scalar_value() == doctest::Approx(0.5));
  CHECK(smooth_l1(Tensor::scalar(0.5), Tensor::scalar(0.0)).scalar_value() ==
        doctest::Approx(0.125));
  CHECK(smooth_l1(Tensor::scalar(3.0), Tensor::scalar(0.0)).scalar_value() ==
        doctest::Approx(2.5));
  CHECK(relu(Tensor::scalar(-2.0)).scalar_value() == 0.0);
  CHECK(dr2n::tanh(Tensor::scalar(0.0)).scalar_value() == 0.0);
}

TEST_CASE("every elementwise op gradient matches finite differences") {
  using OpFn = std::function<Tensor(const std::vector<Tensor>&)>;
  struct Case {
    const char* name;
    int arity;
    OpFn apply;
  };
  const std::vector<Case> cases = {
      {"add", 2, [](const std::vector<Tensor>& in) { return add(in[0], in[1]); }},
      {"sub", 2, [](const std::vector<Tensor>& in) { return sub(in[0], in[1]); }},
      {"mul", 2, [](const std::vector<Tensor>& in) { return mul(in[0], in[1]); }},
      {"sigmoid", 1, [](const std::vector<Tensor>& in) { return sigmoid(in[0]); }},
      {"tanh", 1, [](const std::vector<Tensor>& in) { return dr2n::tanh(in[0]); }},
      {"relu", 1, [](const std::vector<Tensor>& in) { return relu(in[0]); }},
      {"exp", 1, [](const std::vector<Tensor>& in) { return dr2n::exp(in[0]); }},
      {"mean", 1, [](const std::vector<Tensor>& in) { return mean(in[0]); }},
      {"sum", 1, [](const std::vector<Tensor>& in) { return sum(in[0]); }},
      {"smooth_l1", 2,
       [](const std::vector<Tensor>& in) { return smooth_l1(in[0], in[1]); }},
      {"reshape", 1,
       [](const std::vector<Tensor>& in) { return reshape(in[0], {8}); }},
      {"add_row_broadcast_m", 2, nullptr},  // handled below
  };
  for (const auto& c : cases) {
    if (!c.apply) continue;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      Rng rng(derive_seed(fnv1a(c.name), seed));
      std::vector<Tensor> leaves;
      for (int k = 0; k < c.arity; ++k) leaves.push_back(random_tensor({2, 4}, rng));
      auto r = finite_diff_check(
          [&c](const std::vector<Tensor>& in) { return projected_sum(c.apply(in)); },
          leaves);
      CAPTURE(c.name);
      CAPTURE(seed);
      CHECK(r.max_rel_err < 1e-6);
    }
  }
}

TEST_CASE("structural ops gradients match finite differences") {
  Rng rng(4242);
  SUBCASE("add_row_broadcast") {
    auto leaves = std::vector<Tensor>{random_tensor({3, 4}, rng),
                                      random_tensor({1, 4}, rng)};
    auto r = finite_diff_check(
        [](const std::vector<Tensor>& in) {
          return projected_sum(add_row_broadcast(in[0], in[1]));
        },
        leaves);
    CHECK(r.max_rel_err < 1e-6);
  }
  SUBCASE("repeat_rows and repeat_each_row") {
    auto leaves = std::vector<Tensor>{random_tensor({3, 2}, rng)};
    for (auto* op : {&repeat_rows, &repeat_each_row}) {
      auto r = finite_diff_check(
          [op](const std::vector<Tensor>& in) {
            return projected_sum((*op)(in[0], 3));
          },
          leaves);
      CHECK(r.max_rel_err < 1e-6);
    }
  }
  SUBCASE("slice_cols") {
    auto leaves = std::vector<Tensor>{random_tensor({3, 5}, rng)};
    auto r = finite_diff_check(
        [](const std::vector<Tensor>& in) {
          return projected_sum(slice_cols(in[0], 1, 3));
        },
        leaves);
    CHECK(r.max_rel_err < 1e-6);
  }
  SUBCASE("softmax_xent_rows") {
    auto leaves = std::vector<Tensor>{random_tensor({4, 5}, rng, 2.0)};
    std::vector<int> labels = {0, 4, 2, 2};
    auto r = finite_diff_check(
        [&labels](const std::vector<Tensor>& in) {
          return projected_sum(softmax_xent_rows(in[0], labels));
        },
        leaves);
    CHECK(r.max_rel_err < 1e-6);
  }
  SUBCASE("sigmoid_xent_rows") {
    auto leaves = std::vector<Tensor>{random_tensor({4, 5}, rng, 2.0)};
    RowMat targets(4, 5);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 5; ++j) targets(i, j) = rng.uniform() < 0.3 ? 1.0 : 0.0;
    auto r = finite_diff_check(
        [&targets](const std::vector<Tensor>& in) {
          return projected_sum(sigmoid_xent_rows(in[0], targets));
        },
        leaves);
    CHECK(r.max_rel_err < 1e-6);
  }
  SUBCASE("weighted_neighbor_sum") {
    auto leaves = std::vector<Tensor>{random_tensor({4, 4}, rng),
                                      random_tensor({4, 3}, rng)};
    BoolVec mask(4);
    mask << true, true, false, true;
    auto r = finite_diff_check(
        [&mask](const std::vector<Tensor>& in) {
          return projected_sum(weighted_neighbor_sum(in[0], in[1], mask));
        },
        leaves);
    CHECK(r.max_rel_err < 1e-6);
  }
  SUBCASE("row_softmax") {
    auto leaves = std::vector<Tensor>{random_tensor({4, 4}, rng, 2.0)};
    BoolMat adm = BoolMat::Constant(4, 4, true);
    for (Index i = 0; i < 4; ++i) adm(i, i) = false;
    adm.row(2).setConstant(false);
    auto r = finite_diff_check(
        [&adm](const std::vector<Tensor>& in) {
          return projected_sum(row_softmax(in[0], adm, true));
        },
        leaves);
    CHECK(r.max_rel_err < 1e-6);
  }
}

TEST_CASE("smooth_l1 values against hand computation") {
  Vec p(3), t(3);
  p << 0.3, -2.0, 1.4;
  t << 0.1, 0.5, 1.4;
  Tensor out = smooth_l1(Tensor::from_vector(p), Tensor::from_vector(t));
  CHECK(out.values()(0) == doctest::Approx(0.5 * 0.2 * 0.2));
  CHECK(out.values()(1) == doctest::Approx(2.5 - 0.5));
  CHECK(out.values()(2) == doctest::Approx(0.0));
}

TEST_CASE("backward from a plain sum yields all-ones gradient") {
  Tensor p = Tensor::zeros({3, 2});
  sum(p).backward();
  CHECK(p.grad().isApprox(Vec::Ones(6)));
}

TEST_CASE("repeated backward calls accumulate") {
  Tensor p = Tensor::constant({4}, 2.0);
  Tensor loss = sum(mul(p, p));
  loss.backward();
  Vec once = p.grad();
  loss.backward();
  CHECK(p.grad().isApprox(2.0 * once));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor p = Tensor::zeros({3});
  CHECK_THROWS_AS(p.backward(), ShapeError);
}

TEST_CASE("gradient flows through shared subexpressions") {
  // f(x) = sum(x*x + x*x) -> grad 4x
  Tensor x = Tensor::constant({3}, 1.5);
  Tensor sq = mul(x, x);
  sum(add(sq, sq)).backward();
  CHECK(x.grad().isApprox(Vec::Constant(3, 6.0)));
}

TEST_CASE("ParamStore shares by identity, not by value") {
  ParamStore store;
  Rng rng(7);
  Tensor w = store.create_weight("shared/w", {2, 2}, rng);
  Tensor again = store.get("shared/w");
  CHECK(w.node().get() == again.node().get());
  // mutation through one usage site is observed at the other
  again.values_mut()(0) = 42.0;
  CHECK(w.values()(0) == 42.0);
}

TEST_CASE("ParamStore rejects duplicate names and unknown lookups") {
  ParamStore store;
  store.create_zeros("b", {2});
  CHECK_THROWS_AS(store.create_zeros("b", {2}), ConfigError);
  CHECK_THROWS_AS(store.get("nope"), ConfigError);
}

TEST_CASE("grad multiplier scales the effective gradient and nothing else") {
  ParamStore store;
  Rng rng(3);
  Tensor w = store.create_weight("w", {3}, rng);
  sum(mul(w, w)).backward();
  Vec raw = w.grad();
  store.set_grad_multiplier("w", 0.01);
  Vec eff = store.effective_grad("w");
  Vec expect = 0.01 * raw;
  for (Index i = 0; i < raw.size(); ++i) CHECK(eff(i) == expect(i));
  CHECK(w.grad().isApprox(raw));  // raw slot untouched
}

TEST_CASE("weight init is truncated at two standard deviations") {
  ParamStore store;
  Rng rng(123);
  Tensor w = store.create_weight("w", {64, 16}, rng);
  CHECK(w.values().array().abs().maxCoeff() <= 2.0 * kWeightInitStd);
  CHECK(w.values().array().abs().maxCoeff() > 0.0);
  Tensor b = store.create_zeros("b", {16});
  CHECK(b.values().isZero());
}
