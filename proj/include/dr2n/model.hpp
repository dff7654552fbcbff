#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dr2n/box.hpp"
#include "dr2n/gru.hpp"
#include "dr2n/param_store.hpp"
#include "dr2n/relational.hpp"
#include "dr2n/synthworld.hpp"
#include "dr2n/tensor.hpp"

namespace dr2n {

enum class LossMode { ExclusiveSoftmax, MultilabelSigmoid };
LossMode parse_loss_mode(const std::string& s);
std::string to_string(LossMode m);

struct ModelConfig {
  Variant variant = Variant::Dr2n;
  Index num_classes = 8;  // A; class A is the background / false-positive slot
  Index horizon = 5;      // T
  Index history = 6;      // feature steps consumed by the stub (clip length)
  Index hidden_dim = 64;  // d_h
  Index edge_dim = 0;     // d_e; 0 means hidden_dim
  Index cls_hidden = 0;   // classifier MLP width; 0 means hidden_dim
  LossMode loss_mode = LossMode::ExclusiveSoftmax;
  double loc_weight = 1.0;   // alpha on the localization term
  double beta_start = 1.0;   // beta_0
  double beta_end = 0.5;     // beta_T
  Activation node_activation = Activation::Tanh;

  Index logit_dim() const { return num_classes + 1; }
  Index background_class() const { return num_classes; }
  Index effective_edge_dim() const { return edge_dim > 0 ? edge_dim : hidden_dim; }
  Index effective_cls_hidden() const { return cls_hidden > 0 ? cls_hidden : hidden_dim; }
  /// Linear anneal beta_start -> beta_end across t = 0..T.
  double beta(Index t) const;
  void validate() const;
};

/// Rollout output. Logits are kept as recorded tensors so the loss can
/// differentiate through them; boxes are the decoded refinements.
struct Prediction {
  Tensor refined;              // N x 4, differentiable refined boxes
  std::vector<Box> boxes;      // decoded copy of `refined`
  std::vector<Tensor> logits;  // t = 0..T, each N x (A+1)
  std::vector<RowMat> attention;  // per rollout step t = 1..T (relational only)

  Index num_nodes() const { return logits.empty() ? 0 : logits[0].rows(); }
  bool empty() const { return logits.empty(); }
};

/// One forecasting model over a shared parameter store. All weights are
/// shared across actors and timesteps except the per-step output heads of
/// the single-head / multi-head baselines.
class Model {
public:
  /// Registers fresh parameters for the configured variant.
  static Model create(const ModelConfig& cfg, ParamStore& store, Rng& rng);
  /// Binds to previously registered parameters (checkpoint load / sharing).
  static Model attach(const ModelConfig& cfg, const ParamStore& store);

  const ModelConfig& config() const { return cfg_; }

  /// Shared classifier head: (N x d_h) -> (N x A+1). Two-layer MLP.
  Tensor classify(const Tensor& h) const;

  /// Decode predicted deltas against a proposal: centers move additively,
  /// sizes rescale by exp() so widths and heights stay positive.
  static Box refine_box(const Box& proposal, const Eigen::Vector4d& deltas);

  /// Forward pass from the last observed step. No ground truth enters:
  /// the rollout is a function of features, proposals, and parameters only.
  Prediction rollout(const Tensor& features, const std::vector<Box>& proposals,
                     bool capture_attention = false) const;
  /// Rollout with an explicit validity mask (padded-node tests).
  Prediction rollout(const NodeSet& nodes, const std::vector<Box>& proposals,
                     bool capture_attention = false) const;

  /// Total training loss: loc_weight * L_loc + sum_t beta_t * L_cls_t.
  Tensor loss(const Prediction& pred, const Episode& episode) const;

  /// Class probabilities for one logits tensor under the configured loss
  /// mode (softmax rows or elementwise sigmoid). Plain values.
  RowMat probabilities(const Tensor& logits) const;

private:
  Model() = default;
  static Model build(const ModelConfig& cfg, ParamStore* mut_store,
                     const ParamStore* ro_store, Rng* rng);

  ModelConfig cfg_;
  GruCell gru_;
  std::optional<RelationalParams> rel_;
  Tensor cls_w1_, cls_b1_, cls_w2_, cls_b2_;
  // single-head: per-t full MLPs; multi-head: shared trunk + per-t outputs
  Tensor trunk_w_, trunk_b_;
  std::vector<Tensor> head_w1_, head_b1_, head_w2_, head_b2_;
  Tensor box_w_, box_b_;
};

} // namespace dr2n
