#include "dr2n/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dr2n/errors.hpp"

namespace dr2n {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ")";
  return os.str();
}

Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

Vec& TensorNode::grad_ref() {
  if (grad.size() == 0) grad = Vec::Zero(value.size());
  return grad;
}

namespace {

void check_shape_values(const Shape& shape, const Vec& values, const char* op) {
  for (Index d : shape)
    if (d <= 0)
      throw ShapeError(std::string(op) + ": non-positive dimension in shape " +
                       shape_str(shape));
  if (shape_size(shape) != values.size())
    throw ShapeError(std::string(op) + ": shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
}

Eigen::Map<const RowMat> as_mat(const TensorNode& n) {
  return Eigen::Map<const RowMat>(n.value.data(), n.shape[0], n.shape[1]);
}

Eigen::Map<const RowMat> as_mat(const Vec& v, Index r, Index c) {
  return Eigen::Map<const RowMat>(v.data(), r, c);
}

Eigen::Map<RowMat> as_mat_mut(Vec& v, Index r, Index c) {
  return Eigen::Map<RowMat>(v.data(), r, c);
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got shape " +
                     shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

} // namespace

Tensor make_node(Shape shape, Vec value, std::vector<Tensor> parents,
                 BackwardFn fn, const char* op) {
  check_shape_values(shape, value, op);
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.node());
  n->backward_fn = std::move(fn);
  n->op = op;
  return Tensor(std::move(n));
}

Tensor Tensor::leaf(Shape shape, Vec values) {
  return make_node(std::move(shape), std::move(values), {}, nullptr, "leaf");
}

Tensor Tensor::zeros(Shape shape) {
  Vec v = Vec::Zero(shape_size(shape));
  return leaf(std::move(shape), std::move(v));
}

Tensor Tensor::constant(Shape shape, double c) {
  Vec v = Vec::Constant(shape_size(shape), c);
  return leaf(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(double v) { return leaf({1}, Vec::Constant(1, v)); }

Tensor Tensor::from_matrix(const RowMat& m) {
  Vec v(m.size());
  as_mat_mut(v, m.rows(), m.cols()) = m;
  return leaf({m.rows(), m.cols()}, std::move(v));
}

Tensor Tensor::from_vector(const Vec& v) { return leaf({v.size()}, v); }

Index Tensor::rows() const {
  require_rank2(*this, "rows");
  return n_->shape[0];
}

Index Tensor::cols() const {
  require_rank2(*this, "cols");
  return n_->shape[1];
}

Vec& Tensor::values_mut() {
  if (!is_leaf())
    throw std::logic_error("values_mut: only leaf tensors are mutable");
  return n_->value;
}

double Tensor::scalar_value() const {
  if (size() != 1)
    throw ShapeError("scalar_value: tensor of shape " + shape_str(shape()) +
                     " is not a scalar");
  return n_->value(0);
}

Eigen::Map<const RowMat> Tensor::matrix() const {
  require_rank2(*this, "matrix");
  return as_mat(*n_);
}

Vec Tensor::grad() const {
  if (n_->grad.size() == 0) return Vec::Zero(size());
  return n_->grad;
}

void Tensor::zero_grad() const { n_->grad.resize(0); }

void Tensor::backward() const {
  if (!defined()) throw std::logic_error("backward: undefined tensor");
  if (size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_str(shape()));

  // Iterative post-order DFS; the op record is a DAG, so marking on push
  // yields a valid topological order.
  struct Frame {
    TensorNode* node;
    size_t next_parent;
  };
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<Frame> stack;
  stack.push_back({n_.get(), 0});
  seen.insert(n_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode* p = f.node->parents[f.next_parent++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // One sweep's worth of gradients lives in local buffers so that repeated
  // backward calls accumulate into the persistent slots.
  std::unordered_map<TensorNode*, Vec> local;
  local.emplace(n_.get(), Vec::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* nd = *it;
    auto found = local.find(nd);
    if (found == local.end() || !nd->backward_fn) continue;
    std::vector<Vec*> pg;
    pg.reserve(nd->parents.size());
    for (auto& p : nd->parents) {
      auto pit = local.find(p.get());
      if (pit == local.end())
        pit = local.emplace(p.get(), Vec::Zero(p->value.size())).first;
      pg.push_back(&pit->second);
    }
    nd->backward_fn(found->second, pg);
  }
  for (auto& [nd, g] : local) nd->grad_ref() += g;
}

// -- ops ---------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  const Index m = a.rows(), k = a.cols(), n = b.cols();
  Vec out(m * n);
  {
    // Row-sequential accumulation: each output row's rounding depends only
    // on its own inputs and K, never on the total row count. Blocked gemm
    // would re-associate sums when rows are added (padded-node tests).
    auto A = a.matrix();
    auto B = b.matrix();
    auto C = as_mat_mut(out, m, n);
    C.setZero();
    for (Index i = 0; i < m; ++i)
      for (Index kk = 0; kk < k; ++kk) C.row(i) += A(i, kk) * B.row(kk);
  }
  auto an = a.node();
  auto bn = b.node();
  return make_node(
      {m, n}, std::move(out), {a, b},
      [an, bn, m, k, n](const Vec& g, const std::vector<Vec*>& pg) {
        auto G = as_mat(g, m, n);
        as_mat_mut(*pg[0], m, k).noalias() += G * as_mat(*bn).transpose();
        as_mat_mut(*pg[1], k, n).noalias() += as_mat(*an).transpose() * G;
      },
      "matmul");
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  if (a.rank() != b.rank())
    throw ShapeError("concat: rank mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  if (axis < 0 || axis >= a.rank())
    throw ShapeError("concat: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(a.shape()));
  for (Index d = 0; d < a.rank(); ++d)
    if (d != axis && a.shape()[d] != b.shape()[d])
      throw ShapeError("concat: non-axis dimensions differ: " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  if (a.rank() == 1) {
    const Index na = a.size(), nb = b.size();
    Vec out(na + nb);
    out.head(na) = a.values();
    out.tail(nb) = b.values();
    return make_node(
        {na + nb}, std::move(out), {a, b},
        [na, nb](const Vec& g, const std::vector<Vec*>& pg) {
          *pg[0] += g.head(na);
          *pg[1] += g.tail(nb);
        },
        "concat");
  }
  if (a.rank() != 2)
    throw ShapeError("concat: only rank-1 and rank-2 tensors supported, got " +
                     shape_str(a.shape()));
  const Index ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  if (axis == 0) {
    Vec out(a.size() + b.size());
    out.head(a.size()) = a.values();
    out.tail(b.size()) = b.values();
    const Index sa = a.size(), sb = b.size();
    return make_node(
        {ra + rb, ca}, std::move(out), {a, b},
        [sa, sb](const Vec& g, const std::vector<Vec*>& pg) {
          *pg[0] += g.head(sa);
          *pg[1] += g.tail(sb);
        },
        "concat");
  }
  Vec out(ra * (ca + cb));
  auto O = as_mat_mut(out, ra, ca + cb);
  O.leftCols(ca) = a.matrix();
  O.rightCols(cb) = b.matrix();
  return make_node(
      {ra, ca + cb}, std::move(out), {a, b},
      [ra, ca, cb](const Vec& g, const std::vector<Vec*>& pg) {
        auto G = as_mat(g, ra, ca + cb);
        as_mat_mut(*pg[0], ra, ca) += G.leftCols(ca);
        as_mat_mut(*pg[1], ra, cb) += G.rightCols(cb);
      },
      "concat");
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  return make_node(
      std::move(shape), a.values(), {a},
      [](const Vec& g, const std::vector<Vec*>& pg) { *pg[0] += g; }, "reshape");
}

namespace {

// Shared masked-softmax kernel over one contiguous row.
void softmax_row(const double* x, const bool* adm, Index n, double* y) {
  double m = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i)
    if (adm[i] && x[i] > m) m = x[i];
  double z = 0.0;
  for (Index i = 0; i < n; ++i) {
    y[i] = adm[i] ? std::exp(x[i] - m) : 0.0;
    z += y[i];
  }
  for (Index i = 0; i < n; ++i) y[i] /= z;
}

// dL/dx for one softmax row given output y and upstream g.
void softmax_row_backward(const double* y, const bool* adm, const double* g,
                          Index n, double* gx) {
  double dot = 0.0;
  for (Index i = 0; i < n; ++i)
    if (adm[i]) dot += g[i] * y[i];
  for (Index i = 0; i < n; ++i)
    if (adm[i]) gx[i] += y[i] * (g[i] - dot);
}

} // namespace

Tensor softmax(const Tensor& logits, const BoolVec& mask) {
  if (logits.rank() != 1)
    throw ShapeError("softmax: expected a rank-1 tensor, got shape " +
                     shape_str(logits.shape()));
  const Index n = logits.size();
  if (mask.size() != n)
    throw ShapeError("softmax: mask length " + std::to_string(mask.size()) +
                     " does not match logits shape " + shape_str(logits.shape()));
  if (!mask.any())
    throw DegenerateAttentionError("softmax: every entry is masked");
  Vec out(n);
  softmax_row(logits.values().data(), mask.data(), n, out.data());
  Vec y = out;
  BoolVec adm = mask;
  return make_node(
      {n}, std::move(out), {logits},
      [y, adm, n](const Vec& g, const std::vector<Vec*>& pg) {
        softmax_row_backward(y.data(), adm.data(), g.data(), n, pg[0]->data());
      },
      "softmax");
}

Tensor softmax(const Tensor& logits) {
  return softmax(logits, BoolVec::Constant(logits.size(), true));
}

Tensor row_softmax(const Tensor& logits, const BoolMat& admissible,
                   bool zero_empty_rows) {
  require_rank2(logits, "row_softmax");
  const Index r = logits.rows(), c = logits.cols();
  if (admissible.rows() != r || admissible.cols() != c)
    throw ShapeError("row_softmax: admissibility mask is " +
                     shape_str({admissible.rows(), admissible.cols()}) +
                     ", logits are " + shape_str(logits.shape()));
  Vec out = Vec::Zero(r * c);
  for (Index i = 0; i < r; ++i) {
    bool any = false;
    for (Index j = 0; j < c; ++j) any = any || admissible(i, j);
    if (!any) {
      if (!zero_empty_rows)
        throw DegenerateAttentionError("row_softmax: row " + std::to_string(i) +
                                       " has no admissible entry");
      continue;  // row stays zero
    }
    softmax_row(logits.values().data() + i * c, admissible.data() + i * c, c,
                out.data() + i * c);
  }
  Vec y = out;
  BoolMat adm = admissible;
  return make_node(
      {r, c}, std::move(out), {logits},
      [y, adm, r, c](const Vec& g, const std::vector<Vec*>& pg) {
        for (Index i = 0; i < r; ++i) {
          bool any = false;
          for (Index j = 0; j < c; ++j) any = any || adm(i, j);
          if (!any) continue;
          softmax_row_backward(y.data() + i * c, adm.data() + i * c,
                               g.data() + i * c, c, pg[0]->data() + i * c);
        }
      },
      "row_softmax");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_node(
      a.shape(), a.values() + b.values(), {a, b},
      [](const Vec& g, const std::vector<Vec*>& pg) {
        *pg[0] += g;
        *pg[1] += g;
      },
      "add");
}

Tensor add(const Tensor& a, double c) {
  return make_node(
      a.shape(), a.values().array() + c, {a},
      [](const Vec& g, const std::vector<Vec*>& pg) { *pg[0] += g; }, "add_const");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_node(
      a.shape(), a.values() - b.values(), {a, b},
      [](const Vec& g, const std::vector<Vec*>& pg) {
        *pg[0] += g;
        *pg[1] -= g;
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto an = a.node();
  auto bn = b.node();
  return make_node(
      a.shape(), (a.values().array() * b.values().array()).matrix(), {a, b},
      [an, bn](const Vec& g, const std::vector<Vec*>& pg) {
        pg[0]->array() += g.array() * bn->value.array();
        pg[1]->array() += g.array() * an->value.array();
      },
      "mul");
}

Tensor mul(const Tensor& a, double c) {
  return make_node(
      a.shape(), a.values() * c, {a},
      [c](const Vec& g, const std::vector<Vec*>& pg) { *pg[0] += g * c; },
      "mul_const");
}

Tensor sigmoid(const Tensor& a) {
  Vec out(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    const double x = a.values()(i);
    out(i) = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  Vec y = out;
  return make_node(
      a.shape(), std::move(out), {a},
      [y](const Vec& g, const std::vector<Vec*>& pg) {
        pg[0]->array() += g.array() * y.array() * (1.0 - y.array());
      },
      "sigmoid");
}

Tensor tanh(const Tensor& a) {
  Vec out = a.values().array().tanh();
  Vec y = out;
  return make_node(
      a.shape(), std::move(out), {a},
      [y](const Vec& g, const std::vector<Vec*>& pg) {
        pg[0]->array() += g.array() * (1.0 - y.array().square());
      },
      "tanh");
}

Tensor relu(const Tensor& a) {
  Vec out = a.values().array().max(0.0);
  auto an = a.node();
  return make_node(
      a.shape(), std::move(out), {a},
      [an](const Vec& g, const std::vector<Vec*>& pg) {
        pg[0]->array() += g.array() * (an->value.array() > 0.0).cast<double>();
      },
      "relu");
}

Tensor exp(const Tensor& a) {
  Vec out = a.values().array().exp();
  Vec y = out;
  return make_node(
      a.shape(), std::move(out), {a},
      [y](const Vec& g, const std::vector<Vec*>& pg) {
        pg[0]->array() += g.array() * y.array();
      },
      "exp");
}

Tensor mean(const Tensor& a) {
  const Index n = a.size();
  return make_node(
      {1}, Vec::Constant(1, a.values().mean()), {a},
      [n](const Vec& g, const std::vector<Vec*>& pg) {
        pg[0]->array() += g(0) / static_cast<double>(n);
      },
      "mean");
}

Tensor sum(const Tensor& a) {
  return make_node(
      {1}, Vec::Constant(1, a.values().sum()), {a},
      [](const Vec& g, const std::vector<Vec*>& pg) {
        pg[0]->array() += g(0);
      },
      "sum");
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "smooth_l1");
  const Index n = pred.size();
  Vec out(n);
  Vec slope(n);  // d loss / d diff
  for (Index i = 0; i < n; ++i) {
    const double d = pred.values()(i) - target.values()(i);
    if (std::abs(d) < 1.0) {
      out(i) = 0.5 * d * d;
      slope(i) = d;
    } else {
      out(i) = std::abs(d) - 0.5;
      slope(i) = d > 0.0 ? 1.0 : -1.0;
    }
  }
  return make_node(
      pred.shape(), std::move(out), {pred, target},
      [slope](const Vec& g, const std::vector<Vec*>& pg) {
        pg[0]->array() += g.array() * slope.array();
        pg[1]->array() -= g.array() * slope.array();
      },
      "smooth_l1");
}

Tensor add_row_broadcast(const Tensor& m, const Tensor& row) {
  require_rank2(m, "add_row_broadcast");
  require_rank2(row, "add_row_broadcast");
  if (row.rows() != 1 || row.cols() != m.cols())
    throw ShapeError("add_row_broadcast: row " + shape_str(row.shape()) +
                     " does not broadcast over " + shape_str(m.shape()));
  const Index r = m.rows(), c = m.cols();
  Vec out(r * c);
  as_mat_mut(out, r, c) = m.matrix().rowwise() + row.matrix().row(0);
  return make_node(
      {r, c}, std::move(out), {m, row},
      [r, c](const Vec& g, const std::vector<Vec*>& pg) {
        *pg[0] += g;
        as_mat_mut(*pg[1], 1, c) += as_mat(g, r, c).colwise().sum();
      },
      "add_row_broadcast");
}

Tensor repeat_rows(const Tensor& m, Index k) {
  require_rank2(m, "repeat_rows");
  if (k <= 0) throw ShapeError("repeat_rows: count must be positive");
  const Index r = m.rows(), c = m.cols();
  Vec out(r * k * c);
  for (Index b = 0; b < k; ++b)
    out.segment(b * r * c, r * c) = m.values();
  return make_node(
      {r * k, c}, std::move(out), {m},
      [r, c, k](const Vec& g, const std::vector<Vec*>& pg) {
        for (Index b = 0; b < k; ++b) *pg[0] += g.segment(b * r * c, r * c);
      },
      "repeat_rows");
}

Tensor repeat_each_row(const Tensor& m, Index k) {
  require_rank2(m, "repeat_each_row");
  if (k <= 0) throw ShapeError("repeat_each_row: count must be positive");
  const Index r = m.rows(), c = m.cols();
  Vec out(r * k * c);
  for (Index i = 0; i < r; ++i)
    for (Index s = 0; s < k; ++s)
      out.segment((i * k + s) * c, c) = m.values().segment(i * c, c);
  return make_node(
      {r * k, c}, std::move(out), {m},
      [r, c, k](const Vec& g, const std::vector<Vec*>& pg) {
        for (Index i = 0; i < r; ++i)
          for (Index s = 0; s < k; ++s)
            pg[0]->segment(i * c, c) += g.segment((i * k + s) * c, c);
      },
      "repeat_each_row");
}

Tensor slice_cols(const Tensor& m, Index start, Index count) {
  require_rank2(m, "slice_cols");
  if (start < 0 || count <= 0 || start + count > m.cols())
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " +
                     shape_str(m.shape()));
  const Index r = m.rows(), c = m.cols();
  Vec out(r * count);
  as_mat_mut(out, r, count) = m.matrix().middleCols(start, count);
  return make_node(
      {r, count}, std::move(out), {m},
      [r, c, start, count](const Vec& g, const std::vector<Vec*>& pg) {
        as_mat_mut(*pg[0], r, c).middleCols(start, count) += as_mat(g, r, count);
      },
      "slice_cols");
}

Tensor weighted_neighbor_sum(const Tensor& alpha, const Tensor& h,
                             const BoolVec& col_mask) {
  require_rank2(alpha, "weighted_neighbor_sum");
  require_rank2(h, "weighted_neighbor_sum");
  const Index n = alpha.rows(), d = h.cols();
  if (alpha.cols() != h.rows() || col_mask.size() != h.rows())
    throw ShapeError("weighted_neighbor_sum: weights " + shape_str(alpha.shape()) +
                     " vs features " + shape_str(h.shape()) + " with mask length " +
                     std::to_string(col_mask.size()));
  Vec out = Vec::Zero(n * d);
  {
    auto A = alpha.matrix();
    auto H = h.matrix();
    auto Z = as_mat_mut(out, n, d);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < alpha.cols(); ++j) {
        if (!col_mask(j)) continue;
        const double a = A(i, j);
        for (Index k = 0; k < d; ++k) Z(i, k) += a * H(j, k);
      }
  }
  auto an = alpha.node();
  auto hn = h.node();
  BoolVec cm = col_mask;
  const Index m = alpha.cols();
  return make_node(
      {n, d}, std::move(out), {alpha, h},
      [an, hn, cm, n, m, d](const Vec& g, const std::vector<Vec*>& pg) {
        auto A = as_mat(*an);
        auto H = as_mat(*hn);
        auto G = as_mat(g, n, d);
        auto GA = as_mat_mut(*pg[0], n, m);
        auto GH = as_mat_mut(*pg[1], m, d);
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < m; ++j) {
            if (!cm(j)) continue;
            double s = 0.0;
            for (Index k = 0; k < d; ++k) {
              s += G(i, k) * H(j, k);
              GH(j, k) += A(i, j) * G(i, k);
            }
            GA(i, j) += s;
          }
      },
      "weighted_neighbor_sum");
}

Tensor softmax_xent_rows(const Tensor& logits, const std::vector<int>& labels) {
  require_rank2(logits, "softmax_xent_rows");
  const Index r = logits.rows(), c = logits.cols();
  if (static_cast<Index>(labels.size()) != r)
    throw ShapeError("softmax_xent_rows: " + std::to_string(labels.size()) +
                     " labels for logits " + shape_str(logits.shape()));
  for (Index i = 0; i < r; ++i)
    if (labels[i] < 0 || labels[i] >= c)
      throw ConfigError("softmax_xent_rows: label " + std::to_string(labels[i]) +
                        " out of range [0, " + std::to_string(c) + ") at row " +
                        std::to_string(i));
  Vec out(r);
  auto X = logits.matrix();
  for (Index i = 0; i < r; ++i) {
    const double m = X.row(i).maxCoeff();
    const double lse = m + std::log((X.row(i).array() - m).exp().sum());
    out(i) = lse - X(i, labels[i]);
  }
  auto ln = logits.node();
  std::vector<int> lab = labels;
  return make_node(
      {r}, std::move(out), {logits},
      [ln, lab, r, c](const Vec& g, const std::vector<Vec*>& pg) {
        auto X = as_mat(*ln);
        auto GX = as_mat_mut(*pg[0], r, c);
        for (Index i = 0; i < r; ++i) {
          const double m = X.row(i).maxCoeff();
          Eigen::ArrayXd e = (X.row(i).array() - m).exp();
          Eigen::ArrayXd p = e / e.sum();
          p(lab[i]) -= 1.0;
          GX.row(i).array() += g(i) * p.transpose();
        }
      },
      "softmax_xent_rows");
}

Tensor sigmoid_xent_rows(const Tensor& logits, const RowMat& targets) {
  require_rank2(logits, "sigmoid_xent_rows");
  const Index r = logits.rows(), c = logits.cols();
  if (targets.rows() != r || targets.cols() != c)
    throw ShapeError("sigmoid_xent_rows: targets " +
                     shape_str({targets.rows(), targets.cols()}) +
                     " vs logits " + shape_str(logits.shape()));
  Vec out = Vec::Zero(r);
  auto X = logits.matrix();
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) {
      const double x = X(i, j), t = targets(i, j);
      out(i) += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
  auto ln = logits.node();
  RowMat tg = targets;
  return make_node(
      {r}, std::move(out), {logits},
      [ln, tg, r, c](const Vec& g, const std::vector<Vec*>& pg) {
        auto X = as_mat(*ln);
        auto GX = as_mat_mut(*pg[0], r, c);
        for (Index i = 0; i < r; ++i)
          for (Index j = 0; j < c; ++j) {
            const double x = X(i, j);
            const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                      : std::exp(x) / (1.0 + std::exp(x));
            GX(i, j) += g(i) * (s - tg(i, j));
          }
      },
      "sigmoid_xent_rows");
}

} // namespace dr2n
