#include "dr2n/model.hpp"

#include <cmath>

#include "dr2n/errors.hpp"

namespace dr2n {

LossMode parse_loss_mode(const std::string& s) {
  if (s == "exclusive-softmax") return LossMode::ExclusiveSoftmax;
  if (s == "multilabel-sigmoid") return LossMode::MultilabelSigmoid;
  throw ConfigError("unknown loss mode '" + s +
                    "' (expected exclusive-softmax|multilabel-sigmoid)");
}

std::string to_string(LossMode m) {
  return m == LossMode::ExclusiveSoftmax ? "exclusive-softmax"
                                         : "multilabel-sigmoid";
}

double ModelConfig::beta(Index t) const {
  if (horizon == 0) return beta_start;
  return beta_start +
         (beta_end - beta_start) * static_cast<double>(t) /
             static_cast<double>(horizon);
}

void ModelConfig::validate() const {
  if (num_classes < 1) throw ConfigError("model: need at least one class");
  if (horizon < 1) throw ConfigError("model: horizon must be >= 1");
  if (hidden_dim < 1) throw ConfigError("model: hidden_dim must be >= 1");
  if (beta_start <= 0.0 || beta_end <= 0.0)
    throw ConfigError("model: beta schedule endpoints must be positive");
  if (history < 1) throw ConfigError("model: history must be >= 1");
}

Model Model::build(const ModelConfig& cfg, ParamStore* mut_store,
                   const ParamStore* ro_store, Rng* rng) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  const Index dh = cfg.hidden_dim;
  const Index dm = cfg.effective_cls_hidden();
  const Index out = cfg.logit_dim();
  const bool fresh = mut_store != nullptr;

  auto weight = [&](const std::string& name, Shape shape) {
    return fresh ? mut_store->create_weight(name, std::move(shape), *rng)
                 : ro_store->get(name);
  };
  auto bias = [&](const std::string& name, Shape shape) {
    return fresh ? mut_store->create_zeros(name, std::move(shape))
                 : ro_store->get(name);
  };

  if (is_recurrent(cfg.variant)) {
    // shared classifier first: its parameters serve every step
    m.cls_w1_ = weight("cls/w1", {dh, dm});
    m.cls_b1_ = bias("cls/b1", {1, dm});
    m.cls_w2_ = weight("cls/w2", {dm, out});
    m.cls_b2_ = bias("cls/b2", {1, out});
    m.gru_ = fresh ? GruCell::create(*mut_store, "gru", out, dh, *rng)
                   : GruCell::attach(*ro_store, "gru", out, dh);
    if (is_relational(cfg.variant)) {
      m.rel_ = fresh ? RelationalParams::create(*mut_store, "rel", cfg.variant,
                                                dh, cfg.effective_edge_dim(),
                                                cfg.node_activation, *rng)
                     : RelationalParams::attach(*ro_store, "rel", cfg.variant,
                                                dh, cfg.effective_edge_dim(),
                                                cfg.node_activation);
    }
  } else {
    if (cfg.variant == Variant::MultiHead) {
      m.trunk_w_ = weight("trunk/w", {dh, dm});
      m.trunk_b_ = bias("trunk/b", {1, dm});
    }
    for (Index t = 0; t <= cfg.horizon; ++t) {
      const std::string p = "head" + std::to_string(t);
      if (cfg.variant == Variant::SingleHead) {
        m.head_w1_.push_back(weight(p + "/w1", {dh, dm}));
        m.head_b1_.push_back(bias(p + "/b1", {1, dm}));
      }
      m.head_w2_.push_back(weight(p + "/w2", {dm, out}));
      m.head_b2_.push_back(bias(p + "/b2", {1, out}));
    }
  }
  // zero-initialized so the untrained head refines every proposal to itself
  m.box_w_ = bias("box/w", {dh, 4});
  m.box_b_ = bias("box/b", {1, 4});
  return m;
}

Model Model::create(const ModelConfig& cfg, ParamStore& store, Rng& rng) {
  return build(cfg, &store, nullptr, &rng);
}

Model Model::attach(const ModelConfig& cfg, const ParamStore& store) {
  return build(cfg, nullptr, &store, nullptr);
}

Tensor Model::classify(const Tensor& h) const {
  if (!is_recurrent(cfg_.variant))
    throw ConfigError("classify: variant " + to_string(cfg_.variant) +
                      " has per-step heads, not a shared classifier");
  Tensor hidden = relu(add_row_broadcast(matmul(h, cls_w1_), cls_b1_));
  return add_row_broadcast(matmul(hidden, cls_w2_), cls_b2_);
}

Box Model::refine_box(const Box& proposal, const Eigen::Vector4d& d) {
  Box b;
  b.cx = proposal.cx + d(0);
  b.cy = proposal.cy + d(1);
  b.w = proposal.w * std::exp(d(2));
  b.h = proposal.h * std::exp(d(3));
  return b;
}

Prediction Model::rollout(const Tensor& features,
                          const std::vector<Box>& proposals,
                          bool capture_attention) const {
  if (!features.defined() || features.size() == 0) return Prediction{};
  return rollout(NodeSet::all_valid(features), proposals, capture_attention);
}

Prediction Model::rollout(const NodeSet& nodes,
                          const std::vector<Box>& proposals,
                          bool capture_attention) const {
  Prediction pred;
  if (!nodes.h.defined()) return pred;
  const Index n = nodes.count();
  if (n == 0) return pred;
  if (static_cast<Index>(proposals.size()) != n)
    throw ShapeError("rollout: " + std::to_string(proposals.size()) +
                     " proposals for " + std::to_string(n) + " nodes");

  Tensor h0 = init_state(nodes.h, cfg_.hidden_dim);

  // box refinement from the observed-step state
  Tensor deltas = add_row_broadcast(matmul(h0, box_w_), box_b_);
  RowMat centers(n, 2), sizes(n, 2);
  for (Index i = 0; i < n; ++i) {
    centers(i, 0) = proposals[i].cx;
    centers(i, 1) = proposals[i].cy;
    sizes(i, 0) = proposals[i].w;
    sizes(i, 1) = proposals[i].h;
  }
  pred.refined = concat(
      add(slice_cols(deltas, 0, 2), Tensor::from_matrix(centers)),
      mul(exp(slice_cols(deltas, 2, 2)), Tensor::from_matrix(sizes)), 1);
  pred.boxes.resize(n);
  for (Index i = 0; i < n; ++i) {
    pred.boxes[i] = Box{pred.refined.matrix()(i, 0), pred.refined.matrix()(i, 1),
                        pred.refined.matrix()(i, 2), pred.refined.matrix()(i, 3)};
  }

  if (!is_recurrent(cfg_.variant)) {
    for (Index t = 0; t <= cfg_.horizon; ++t) {
      Tensor hidden;
      if (cfg_.variant == Variant::SingleHead) {
        hidden = relu(add_row_broadcast(matmul(h0, head_w1_[t]), head_b1_[t]));
      } else {
        hidden = relu(add_row_broadcast(matmul(h0, trunk_w_), trunk_b_));
      }
      pred.logits.push_back(
          add_row_broadcast(matmul(hidden, head_w2_[t]), head_b2_[t]));
    }
    return pred;
  }

  Tensor a = classify(h0);
  pred.logits.push_back(a);
  Tensor h = h0;
  for (Index t = 1; t <= cfg_.horizon; ++t) {
    Tensor refreshed = h;
    if (rel_) {
      EdgeAttention attn;
      refreshed = relational_layer(*rel_, NodeSet{h, nodes.mask}, &attn).h;
      if (capture_attention) {
        RowMat alpha(n, n);
        alpha = attn.alpha.matrix();
        pred.attention.push_back(std::move(alpha));
      }
    }
    // the fed-back action vector is the previous soft logits, never labels
    h = gru_.step(refreshed, a);
    a = classify(h);
    pred.logits.push_back(a);
  }
  return pred;
}

Tensor Model::loss(const Prediction& pred, const Episode& episode) const {
  if (pred.empty()) return Tensor::scalar(0.0);
  const Index n = pred.num_nodes();
  if (n != episode.num_nodes())
    throw ShapeError("loss: prediction covers " + std::to_string(n) +
                     " nodes, episode has " + std::to_string(episode.num_nodes()));
  const Index t_count = static_cast<Index>(pred.logits.size());
  if (t_count != cfg_.horizon + 1)
    throw ShapeError("loss: prediction horizon mismatch");
  for (const auto& a : episode.actors)
    if (static_cast<Index>(a.labels.size()) != cfg_.horizon + 1)
      throw ShapeError("loss: episode labels cover " +
                       std::to_string(a.labels.size() - 1) +
                       " future steps, model expects " +
                       std::to_string(cfg_.horizon));

  // localization: smooth L1 between refined and ground-truth boxes,
  // averaged over true-actor nodes only
  Tensor total;
  const Index n_true = episode.num_actors();
  if (n_true > 0 && cfg_.loc_weight != 0.0) {
    RowMat gt = RowMat::Zero(n, 4);
    RowMat wrow = RowMat::Zero(n, 4);
    for (Index i = 0; i < n; ++i) {
      const int k = episode.node_actor(i);
      if (k < 0) continue;
      const Box& b = episode.actors[k].gt_box;
      gt.row(i) << b.cx, b.cy, b.w, b.h;
      wrow.row(i).setConstant(1.0 / static_cast<double>(n_true));
    }
    Tensor l1 = smooth_l1(pred.refined, Tensor::from_matrix(gt));
    Tensor l_loc = sum(mul(l1, Tensor::from_matrix(wrow)));
    total = mul(l_loc, cfg_.loc_weight);
  } else {
    total = Tensor::scalar(0.0);
  }

  for (Index t = 0; t <= cfg_.horizon; ++t) {
    std::vector<int> labels(n);
    for (Index i = 0; i < n; ++i) {
      const int k = episode.node_actor(i);
      int lab = k < 0 ? static_cast<int>(cfg_.background_class())
                      : episode.actors[k].labels[t];
      if (lab < 0 || lab > cfg_.background_class())
        throw ConfigError("loss: label " + std::to_string(lab) +
                          " out of range at t=" + std::to_string(t));
      labels[i] = lab;
    }
    Tensor l_cls;
    if (cfg_.loss_mode == LossMode::ExclusiveSoftmax) {
      l_cls = mean(softmax_xent_rows(pred.logits[t], labels));
    } else {
      RowMat targets = RowMat::Zero(n, cfg_.logit_dim());
      for (Index i = 0; i < n; ++i) targets(i, labels[i]) = 1.0;
      l_cls = mean(sigmoid_xent_rows(pred.logits[t], targets));
    }
    total = add(total, mul(l_cls, cfg_.beta(t)));
  }
  return total;
}

RowMat Model::probabilities(const Tensor& logits) const {
  const Index n = logits.rows(), c = logits.cols();
  RowMat probs(n, c);
  auto X = logits.matrix();
  if (cfg_.loss_mode == LossMode::ExclusiveSoftmax) {
    for (Index i = 0; i < n; ++i) {
      const double m = X.row(i).maxCoeff();
      Eigen::ArrayXd e = (X.row(i).array() - m).exp();
      probs.row(i) = (e / e.sum()).transpose();
    }
  } else {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < c; ++j) {
        const double x = X(i, j);
        probs(i, j) = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                               : std::exp(x) / (1.0 + std::exp(x));
      }
  }
  return probs;
}

} // namespace dr2n
