#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dr2n {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Vec = Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolVec = Eigen::Array<bool, Eigen::Dynamic, 1>;
using BoolMat = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_str(const Shape& s);
Index shape_size(const Shape& s);

class Tensor;

/// Per-backward-call gradient buffers. Jacobian-transpose contributions are
/// staged here and folded into the persistent per-tensor gradient slots once
/// the sweep finishes, so repeated backward calls accumulate.
using BackwardFn =
    std::function<void(const Vec& g, const std::vector<Vec*>& parent_grads)>;

struct TensorNode {
  Shape shape;
  Vec value;  // flat, row-major
  Vec grad;   // persistent accumulation slot; empty until first backward
  std::vector<std::shared_ptr<TensorNode>> parents;
  BackwardFn backward_fn;  // null for leaves
  const char* op = "leaf";

  Index size() const { return value.size(); }
  Vec& grad_ref();  // allocates and zeroes on first use
};

/// Value-semantics handle to a node of the recorded computation. Copies
/// share the node; parameter sharing across usage sites is shared-node
/// identity, not value equality.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}

  static Tensor leaf(Shape shape, Vec values);
  static Tensor zeros(Shape shape);
  static Tensor constant(Shape shape, double v);
  static Tensor scalar(double v);  // shape {1}
  static Tensor from_matrix(const RowMat& m);         // shape {r, c}
  static Tensor from_vector(const Vec& v);            // shape {n}

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  Index rank() const { return static_cast<Index>(n_->shape.size()); }
  Index size() const { return n_->value.size(); }
  Index rows() const;  // rank-2 only
  Index cols() const;  // rank-2 only
  bool is_leaf() const { return n_->parents.empty(); }
  const char* op() const { return n_->op; }

  const Vec& values() const { return n_->value; }
  /// Mutable access to a leaf's storage (parameter updates, checkpoint
  /// load). Recorded nodes are immutable once created.
  Vec& values_mut();
  double scalar_value() const;
  Eigen::Map<const RowMat> matrix() const;  // rank-2 row-major view

  bool has_grad() const { return n_->grad.size() != 0; }
  /// Gradient accumulated by backward passes; zeros if none ran yet.
  Vec grad() const;
  void zero_grad() const;

  /// Reverse sweep from this scalar. Gradients of every tensor reachable
  /// through the op record are accumulated (repeat calls add).
  void backward() const;

  std::shared_ptr<TensorNode> node() const { return n_; }
  TensorNode* raw() const { return n_.get(); }

private:
  std::shared_ptr<TensorNode> n_;
};

Tensor make_node(Shape shape, Vec value, std::vector<Tensor> parents,
                 BackwardFn fn, const char* op);

// -- recorded operations ----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor reshape(const Tensor& a, Shape shape);

/// Numerically stabilized masked softmax over a rank-1 tensor. Masked
/// entries are exactly zero in the output and receive zero gradient.
Tensor softmax(const Tensor& logits, const BoolVec& mask);
Tensor softmax(const Tensor& logits);

/// Row-wise masked softmax over a rank-2 tensor. A row with no admissible
/// column becomes all zeros when zero_empty_rows is set, and throws
/// otherwise.
Tensor row_softmax(const Tensor& logits, const BoolMat& admissible,
                   bool zero_empty_rows);

Tensor add(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double c);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, double c);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a);

/// Elementwise smooth L1: 0.5 d^2 for |d| < 1 else |d| - 0.5, d = pred - target.
Tensor smooth_l1(const Tensor& pred, const Tensor& target);

/// m (r x c) plus a (1 x c) row, broadcast down the rows (bias add).
Tensor add_row_broadcast(const Tensor& m, const Tensor& row);
/// Whole matrix stacked k times: (r*k) x c.
Tensor repeat_rows(const Tensor& m, Index k);
/// Each row repeated k consecutive times: (r*k) x c.
Tensor repeat_each_row(const Tensor& m, Index k);
Tensor slice_cols(const Tensor& m, Index start, Index count);

/// z_i = sum over unmasked j of alpha(i, j) * h(j, :), accumulated in
/// ascending-j scalar order. Masked columns are skipped outright, so adding
/// a masked node cannot perturb the rounding of unmasked outputs.
Tensor weighted_neighbor_sum(const Tensor& alpha, const Tensor& h,
                             const BoolVec& col_mask);

/// Per-row softmax cross entropy against integer labels; rank-1 result of
/// length rows(logits). Stable log-sum-exp form.
Tensor softmax_xent_rows(const Tensor& logits, const std::vector<int>& labels);
/// Per-row sum of sigmoid cross entropies against a dense 0/1 target
/// matrix; rank-1 result of length rows(logits).
Tensor sigmoid_xent_rows(const Tensor& logits, const RowMat& targets);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add(a, c); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return mul(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul(a, c); }

} // namespace dr2n
