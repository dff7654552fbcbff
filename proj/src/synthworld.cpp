#include "dr2n/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "dr2n/errors.hpp"

namespace dr2n {

using nlohmann::json;

WorldMode parse_world_mode(const std::string& s) {
  if (s == "multi-actor") return WorldMode::MultiActor;
  if (s == "single-actor-clip") return WorldMode::SingleActorClip;
  throw ConfigError("unknown world mode '" + s +
                    "' (expected multi-actor|single-actor-clip)");
}

std::string to_string(WorldMode m) {
  return m == WorldMode::MultiActor ? "multi-actor" : "single-actor-clip";
}

namespace {

void check_prob_rows(const RowMat& table, Index n, const char* name) {
  if (table.rows() != n || table.cols() != n)
    throw ConfigError(std::string(name) + " must be " + std::to_string(n) + "x" +
                      std::to_string(n));
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (table(i, j) < 0.0)
        throw ConfigError(std::string(name) + " row " + std::to_string(i) +
                          " has a negative entry");
      s += table(i, j);
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw ConfigError(std::string(name) + " row " + std::to_string(i) +
                        " sums to " + std::to_string(s) + ", not 1");
  }
}

} // namespace

void WorldConfig::validate() const {
  if (num_classes < 2) throw ConfigError("world: need at least 2 classes");
  if (horizon < 1) throw ConfigError("world: horizon must be >= 1");
  if (feature_dim < 8) throw ConfigError("world: feature_dim too small");
  if (n_true_min < 1 || n_true_max < n_true_min)
    throw ConfigError("world: bad actor count range");
  if (n_fake_min < 0 || n_fake_max < n_fake_min)
    throw ConfigError("world: bad distractor count range");
  if (distractor_rate < 0.0 || distractor_rate > 1.0)
    throw ConfigError("world: distractor_rate outside [0, 1]");
  if (interact_prob < 0.0 || interact_prob > 1.0)
    throw ConfigError("world: interact_prob outside [0, 1]");
  check_prob_rows(solo_table, num_classes, "solo_table");
  check_prob_rows(pair_table, num_classes, "pair_table");
  for (int c : trigger_classes)
    if (c < 0 || c >= num_classes)
      throw ConfigError("world: trigger class " + std::to_string(c) +
                        " out of range");
  if (mode == WorldMode::SingleActorClip) {
    if (clip_length < 1) throw ConfigError("world: clip_length must be >= 1");
    if (clip_ambiguity < 0.0 || clip_ambiguity > 1.0)
      throw ConfigError("world: clip_ambiguity outside [0, 1]");
  }
}

namespace {

RowMat sticky_cycle_table(Index a) {
  // mildly sticky drift; solo futures stay guessable but far from certain
  RowMat t = RowMat::Constant(a, a, 0.30 / static_cast<double>(a - 2));
  for (Index i = 0; i < a; ++i) {
    t(i, i) = 0.35;
    t(i, (i + 1) % a) = 0.35;
  }
  return t;
}

RowMat response_table(Index a) {
  // partner class q -> deterministic response class (q + 4) mod a
  RowMat t = RowMat::Zero(a, a);
  for (Index q = 0; q < a; ++q) t(q, (q + 4) % a) = 1.0;
  return t;
}

} // namespace

WorldConfig WorldConfig::defaults() {
  WorldConfig c;
  c.solo_table = sticky_cycle_table(c.num_classes);
  c.pair_table = response_table(c.num_classes);
  return c;
}

WorldConfig WorldConfig::clip_defaults() {
  WorldConfig c = defaults();
  c.mode = WorldMode::SingleActorClip;
  c.n_true_min = c.n_true_max = 1;
  c.n_fake_min = 1;
  c.n_fake_max = 3;
  c.horizon = 2;
  c.feature_noise = 0.3;
  return c;
}

int Episode::node_actor(Index n) const {
  int k = -1;
  for (Index i = 0; i <= n; ++i)
    if (!nodes[i].distractor) ++k;
  return nodes[n].distractor ? -1 : k;
}

RowMat Episode::feature_matrix(Index step) const {
  const Index n = num_nodes();
  if (n == 0) return RowMat(0, 0);
  const Index d = nodes[0].features.cols();
  RowMat f(n, d);
  for (Index i = 0; i < n; ++i) {
    if (step < 0 || step >= nodes[i].features.rows())
      throw ShapeError("feature step " + std::to_string(step) +
                       " out of range for node " + std::to_string(i));
    f.row(i) = nodes[i].features.row(step);
  }
  return f;
}

Index Episode::feature_steps() const {
  return nodes.empty() ? 0 : nodes[0].features.rows();
}

std::vector<Box> Episode::proposal_boxes() const {
  std::vector<Box> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.proposal);
  return out;
}

namespace {

RowMat random_embedding(std::uint64_t seed, Index rows, Index cols,
                        double scale) {
  Rng rng(seed);
  RowMat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

} // namespace

RowMat class_embeddings(const WorldConfig& cfg) {
  return random_embedding(derive_seed(cfg.embed_seed, "class"), cfg.num_classes,
                          cfg.feature_dim,
                          1.0 / std::sqrt(static_cast<double>(cfg.feature_dim)));
}

RowMat context_embeddings(const WorldConfig& cfg) {
  return random_embedding(derive_seed(cfg.embed_seed, "context"),
                          cfg.num_classes, cfg.feature_dim,
                          1.0 / std::sqrt(static_cast<double>(cfg.feature_dim)));
}

RowMat position_projection(const WorldConfig& cfg) {
  return random_embedding(derive_seed(cfg.embed_seed, "position"),
                          cfg.feature_dim, 4,
                          0.25 / std::sqrt(static_cast<double>(cfg.feature_dim)));
}

Vec stationary_distribution(const RowMat& table) {
  const Index n = table.rows();
  Vec pi = Vec::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < 500; ++it) {
    Vec next = Vec::Zero(n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) next(j) += pi(i) * table(i, j);
    next /= next.sum();
    pi = next;
  }
  return pi;
}

namespace {

Box sample_box(Rng& rng, const WorldConfig& cfg) {
  Box b;
  b.w = rng.uniform(cfg.box_min, cfg.box_max);
  b.h = rng.uniform(cfg.box_min, cfg.box_max);
  b.cx = rng.uniform(0.5 * b.w, 1.0 - 0.5 * b.w);
  b.cy = rng.uniform(0.5 * b.h, 1.0 - 0.5 * b.h);
  return b;
}

Box jitter_box(const Box& gt, Rng& rng, double rel) {
  Box p;
  p.cx = gt.cx + gt.w * rng.uniform(-rel, rel);
  p.cy = gt.cy + gt.h * rng.uniform(-rel, rel);
  p.w = gt.w * (1.0 + rng.uniform(-rel, rel));
  p.h = gt.h * (1.0 + rng.uniform(-rel, rel));
  return p;
}

Vec feature_of(const RowMat& emb, const RowMat& pos_proj, int cls,
               const Box& proposal, double noise, Rng& rng) {
  Eigen::Vector4d b(proposal.cx, proposal.cy, proposal.w, proposal.h);
  Vec f = emb.row(cls).transpose() + pos_proj * b;
  for (Index i = 0; i < f.size(); ++i) f(i) += noise * rng.normal();
  return f;
}

void simulate_labels(const WorldConfig& cfg, const std::vector<Box>& gt_boxes,
                     std::vector<std::vector<int>>& labels, Rng& rng) {
  const Index n = static_cast<Index>(gt_boxes.size());
  const Vec pi = stationary_distribution(cfg.solo_table);
  for (Index k = 0; k < n; ++k) {
    labels[k].assign(cfg.horizon + 1, 0);
    labels[k][0] = rng.categorical(pi.data(), static_cast<int>(pi.size()));
  }
  const auto is_trigger = [&](int c) {
    return std::find(cfg.trigger_classes.begin(), cfg.trigger_classes.end(), c) !=
           cfg.trigger_classes.end();
  };
  for (Index t = 1; t <= cfg.horizon; ++t) {
    for (Index k = 0; k < n; ++k) {
      // nearest trigger-class agent within the interaction radius at t-1
      int partner = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < n; ++j) {
        if (j == k || !is_trigger(labels[j][t - 1])) continue;
        const double dx = gt_boxes[j].cx - gt_boxes[k].cx;
        const double dy = gt_boxes[j].cy - gt_boxes[k].cy;
        const double dist = std::sqrt(dx * dx + dy * dy);
        if (dist <= cfg.interaction_radius && dist < best) {
          best = dist;
          partner = static_cast<int>(j);
        }
      }
      const int prev = labels[k][t - 1];
      if (partner >= 0 && rng.uniform() < cfg.interact_prob) {
        const int q = labels[partner][t - 1];
        labels[k][t] = rng.categorical(cfg.pair_table.row(q).data(),
                                       static_cast<int>(cfg.num_classes));
      } else {
        labels[k][t] = rng.categorical(cfg.solo_table.row(prev).data(),
                                       static_cast<int>(cfg.num_classes));
      }
    }
  }
}

} // namespace

Episode generate(const WorldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Episode ep;
  ep.seed = seed;

  const RowMat emb = class_embeddings(cfg);
  const RowMat ctx_emb = context_embeddings(cfg);
  const RowMat pos_proj = position_projection(cfg);

  const Index n_true = rng.uniform_int(cfg.n_true_min, cfg.n_true_max);
  Index n_fake_raw = rng.uniform_int(cfg.n_fake_min, cfg.n_fake_max);
  Index n_fake = 0;
  for (Index i = 0; i < n_fake_raw; ++i)
    if (rng.uniform() < cfg.distractor_rate) ++n_fake;

  std::vector<Box> gt_boxes(n_true);
  for (auto& b : gt_boxes) b = sample_box(rng, cfg);

  std::vector<std::vector<int>> labels(n_true);
  int clip_class = -1;
  if (cfg.mode == WorldMode::SingleActorClip) {
    clip_class = static_cast<int>(rng.uniform_int(0, cfg.num_classes - 1));
    for (auto& l : labels) l.assign(cfg.horizon + 1, clip_class);
    ep.clip_label = clip_class;
  } else {
    simulate_labels(cfg, gt_boxes, labels, rng);
  }

  // assemble nodes: actors first, then context (clip mode), then distractors
  struct Pending {
    EpisodeNode node;
    int actor = -1;
  };
  std::vector<Pending> pending;
  const Index steps =
      cfg.mode == WorldMode::SingleActorClip ? cfg.clip_length : 1;

  for (Index k = 0; k < n_true; ++k) {
    Pending p;
    p.actor = static_cast<int>(k);
    p.node.distractor = false;
    p.node.proposal = jitter_box(gt_boxes[k], rng, cfg.proposal_jitter);
    p.node.features.resize(steps, cfg.feature_dim);
    if (cfg.mode == WorldMode::SingleActorClip) {
      const int confuser = (clip_class + 1 + static_cast<int>(rng.uniform_int(
                                                 0, cfg.num_classes - 2))) %
                           static_cast<int>(cfg.num_classes);
      for (Index s = 0; s < steps; ++s) {
        const double w =
            steps == 1 ? 1.0
                       : cfg.clip_ambiguity + (1.0 - cfg.clip_ambiguity) *
                             static_cast<double>(s) /
                             static_cast<double>(steps - 1);
        Eigen::Vector4d b(p.node.proposal.cx, p.node.proposal.cy,
                          p.node.proposal.w, p.node.proposal.h);
        Vec f = w * emb.row(clip_class).transpose() +
                (1.0 - w) * emb.row(confuser).transpose() + pos_proj * b;
        for (Index i = 0; i < f.size(); ++i)
          f(i) += cfg.feature_noise * rng.normal();
        p.node.features.row(s) = f.transpose();
      }
    } else {
      p.node.features.row(0) =
          feature_of(emb, pos_proj, labels[k][0], p.node.proposal,
                     cfg.feature_noise, rng)
              .transpose();
    }
    pending.push_back(std::move(p));
  }

  if (cfg.mode == WorldMode::SingleActorClip) {
    const Index n_ctx = rng.uniform_int(cfg.clip_context_min, cfg.clip_context_max);
    for (Index i = 0; i < n_ctx; ++i) {
      Pending p;
      p.node.distractor = true;
      p.node.proposal = sample_box(rng, cfg);
      p.node.features.resize(steps, cfg.feature_dim);
      for (Index s = 0; s < steps; ++s) {
        Vec f = ctx_emb.row(clip_class).transpose();
        for (Index d = 0; d < cfg.feature_dim; ++d)
          f(d) += cfg.context_noise * rng.normal();
        p.node.features.row(s) = f.transpose();
      }
      pending.push_back(std::move(p));
    }
  }

  for (Index i = 0; i < n_fake; ++i) {
    Pending p;
    p.node.distractor = true;
    p.node.proposal = sample_box(rng, cfg);
    p.node.features.resize(steps, cfg.feature_dim);
    for (Index s = 0; s < steps; ++s)
      for (Index d = 0; d < cfg.feature_dim; ++d)
        p.node.features(s, d) = cfg.distractor_noise * rng.normal();
    pending.push_back(std::move(p));
  }

  // shuffle node order; actors stay listed in node-appearance order
  for (Index i = static_cast<Index>(pending.size()) - 1; i > 0; --i)
    std::swap(pending[i], pending[rng.uniform_int(0, i)]);
  for (auto& p : pending) {
    ep.nodes.push_back(std::move(p.node));
    if (p.actor >= 0) {
      EpisodeActor a;
      a.gt_box = gt_boxes[p.actor];
      a.labels = labels[p.actor];
      ep.actors.push_back(std::move(a));
    }
  }
  return ep;
}

// -- serialization ------------------------------------------------------------

namespace {

json box_to_json(const Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw ConfigError("box must be a 4-element array");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>()};
}

} // namespace

std::string serialize(const Episode& ep, const std::string& config_hash) {
  json j;
  j["seed"] = ep.seed;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  json nodes = json::array();
  for (const auto& n : ep.nodes) {
    json jn;
    jn["box"] = box_to_json(n.proposal);
    if (n.features.rows() == 1) {
      json f = json::array();
      for (Index d = 0; d < n.features.cols(); ++d) f.push_back(n.features(0, d));
      jn["feat"] = std::move(f);
    } else {
      json fs = json::array();
      for (Index s = 0; s < n.features.rows(); ++s) {
        json f = json::array();
        for (Index d = 0; d < n.features.cols(); ++d)
          f.push_back(n.features(s, d));
        fs.push_back(std::move(f));
      }
      jn["feat"] = std::move(fs);
    }
    jn["distractor"] = n.distractor;
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  json actors = json::array();
  for (const auto& a : ep.actors) {
    json ja;
    ja["gt_box"] = box_to_json(a.gt_box);
    ja["labels"] = a.labels;
    actors.push_back(std::move(ja));
  }
  j["actors"] = std::move(actors);
  if (ep.clip_label) j["clip_label"] = *ep.clip_label;
  return j.dump();
}

Episode deserialize(const std::string& line, int line_number) {
  const std::string where =
      line_number >= 0 ? "line " + std::to_string(line_number) + ": " : "";
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ConfigError(where + "episode parse error: " + e.what());
  }
  try {
    Episode ep;
    ep.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("nodes").is_array() || j["nodes"].empty())
      throw ConfigError("episode has no nodes");
    if (!j.at("actors").is_array() || j["actors"].empty())
      throw ConfigError("episode has no actors");
    Index expected_steps = -1, expected_dim = -1;
    for (const auto& jn : j["nodes"]) {
      EpisodeNode n;
      n.proposal = box_from_json(jn.at("box"));
      n.distractor = jn.at("distractor").get<bool>();
      const json& f = jn.at("feat");
      if (!f.is_array() || f.empty()) throw ConfigError("empty feature array");
      if (f[0].is_array()) {
        n.features.resize(static_cast<Index>(f.size()),
                          static_cast<Index>(f[0].size()));
        for (Index s = 0; s < n.features.rows(); ++s) {
          if (static_cast<Index>(f[s].size()) != n.features.cols())
            throw ConfigError("ragged feature steps");
          for (Index d = 0; d < n.features.cols(); ++d)
            n.features(s, d) = f[s][d].get<double>();
        }
      } else {
        n.features.resize(1, static_cast<Index>(f.size()));
        for (Index d = 0; d < n.features.cols(); ++d)
          n.features(0, d) = f[d].get<double>();
      }
      if (expected_steps < 0) {
        expected_steps = n.features.rows();
        expected_dim = n.features.cols();
      } else if (n.features.rows() != expected_steps ||
                 n.features.cols() != expected_dim) {
        throw ConfigError("feature dimensions differ across nodes");
      }
      ep.nodes.push_back(std::move(n));
    }
    Index n_true = 0;
    for (const auto& n : ep.nodes) n_true += n.distractor ? 0 : 1;
    if (static_cast<Index>(j["actors"].size()) != n_true)
      throw ConfigError("actor count does not match non-distractor nodes");
    Index labels_len = -1;
    for (const auto& ja : j["actors"]) {
      EpisodeActor a;
      a.gt_box = box_from_json(ja.at("gt_box"));
      a.labels = ja.at("labels").get<std::vector<int>>();
      if (a.labels.empty()) throw ConfigError("actor has no labels");
      if (labels_len < 0)
        labels_len = static_cast<Index>(a.labels.size());
      else if (static_cast<Index>(a.labels.size()) != labels_len)
        throw ConfigError("label horizon differs across actors");
      ep.actors.push_back(std::move(a));
    }
    if (j.contains("clip_label")) ep.clip_label = j["clip_label"].get<int>();
    return ep;
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(where + "episode schema violation: " + e.what());
  }
}

void write_jsonl(const std::string& path, const WorldConfig& cfg, Index count,
                 std::uint64_t base_seed, const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (Index i = 0; i < count; ++i) {
    Episode ep = generate(cfg, derive_seed(base_seed, static_cast<std::uint64_t>(i)));
    out << serialize(ep, config_hash) << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<Episode> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<Episode> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(deserialize(line, line_no));
  }
  return out;
}

} // namespace dr2n
