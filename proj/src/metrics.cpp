#include "dr2n/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "dr2n/errors.hpp"

namespace dr2n {

using nlohmann::json;

EpisodePrediction predict_episode(const Model& model, const Episode& ep) {
  EpisodePrediction out;
  Prediction pred = model.rollout(Tensor::from_matrix(ep.feature_matrix(0)),
                                  ep.proposal_boxes());
  out.boxes = pred.boxes;
  out.probs.reserve(pred.logits.size());
  for (const auto& l : pred.logits) out.probs.push_back(model.probabilities(l));
  return out;
}

std::vector<EpisodePrediction> predict_all(const Model& model,
                                           const std::vector<Episode>& eps) {
  std::vector<EpisodePrediction> out;
  out.reserve(eps.size());
  for (const auto& ep : eps) out.push_back(predict_episode(model, ep));
  return out;
}

MapResult map_from_predictions(const std::vector<EpisodePrediction>& preds,
                               const std::vector<Episode>& episodes, Index t,
                               double iou_thresh) {
  if (episodes.empty()) throw ConfigError("map_at_t: empty eval set");
  if (preds.size() != episodes.size())
    throw ConfigError("map_at_t: " + std::to_string(preds.size()) +
                      " predictions for " + std::to_string(episodes.size()) +
                      " episodes");
  Index num_classes = 0;
  for (const auto& p : preds)
    if (!p.probs.empty()) {
      if (t < 0 || t >= static_cast<Index>(p.probs.size()))
        throw ConfigError("map_at_t: step " + std::to_string(t) +
                          " beyond prediction horizon");
      num_classes = p.probs[0].cols() - 1;  // background is not evaluated
      break;
    }

  struct Det {
    double score;
    Index ep, node;
  };

  MapResult result;
  double ap_sum = 0.0;
  Index classes_with_gt = 0;
  for (Index c = 0; c < num_classes; ++c) {
    // ground truth instances of class c at time t
    Index total_gt = 0;
    for (const auto& ep : episodes)
      for (const auto& a : ep.actors)
        if (t < static_cast<Index>(a.labels.size()) && a.labels[t] == c)
          ++total_gt;
    ClassAp entry;
    entry.cls = static_cast<int>(c);
    entry.num_gt = total_gt;
    if (total_gt == 0) {
      result.per_class.push_back(entry);
      continue;
    }

    std::vector<Det> dets;
    for (size_t e = 0; e < preds.size(); ++e) {
      if (preds[e].probs.empty()) continue;
      const RowMat& p = preds[e].probs[t];
      for (Index n = 0; n < p.rows(); ++n)
        dets.push_back({p(n, c), static_cast<Index>(e), n});
    }
    std::sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.ep != b.ep) return a.ep < b.ep;
      return a.node < b.node;
    });

    // greedy matching in rank order
    std::vector<std::vector<bool>> used(episodes.size());
    for (size_t e = 0; e < episodes.size(); ++e)
      used[e].assign(episodes[e].actors.size(), false);
    std::vector<bool> tp(dets.size(), false);
    for (size_t d = 0; d < dets.size(); ++d) {
      const Episode& ep = episodes[dets[d].ep];
      const Box& box = preds[dets[d].ep].boxes[dets[d].node];
      double best_iou = iou_thresh;
      int best_k = -1;
      for (size_t k = 0; k < ep.actors.size(); ++k) {
        if (used[dets[d].ep][k] || ep.actors[k].labels[t] != c) continue;
        const double v = iou(box, ep.actors[k].gt_box);
        if (v > best_iou) {
          best_iou = v;
          best_k = static_cast<int>(k);
        }
      }
      if (best_k >= 0) {
        used[dets[d].ep][best_k] = true;
        tp[d] = true;
      }
    }

    // precision envelope over the ranked list
    const size_t nd = dets.size();
    std::vector<double> precision(nd), recall(nd);
    Index cum_tp = 0;
    for (size_t d = 0; d < nd; ++d) {
      cum_tp += tp[d] ? 1 : 0;
      precision[d] = static_cast<double>(cum_tp) / static_cast<double>(d + 1);
      recall[d] = static_cast<double>(cum_tp) / static_cast<double>(total_gt);
    }
    for (size_t d = nd; d-- > 1;)
      precision[d - 1] = std::max(precision[d - 1], precision[d]);
    double ap = 0.0, prev_recall = 0.0;
    for (size_t d = 0; d < nd; ++d) {
      if (!tp[d]) continue;
      ap += (recall[d] - prev_recall) * precision[d];
      prev_recall = recall[d];
    }
    entry.ap = ap;
    result.per_class.push_back(entry);
    ap_sum += ap;
    ++classes_with_gt;
  }
  result.map = classes_with_gt > 0 ? ap_sum / static_cast<double>(classes_with_gt)
                                   : 0.0;
  return result;
}

MapResult map_at_t(const std::vector<EpisodePrediction>& preds,
                   const std::vector<Episode>& episodes, Index t,
                   double iou_thresh) {
  return map_from_predictions(preds, episodes, t, iou_thresh);
}

double accuracy_at_k(const Model& model, const std::vector<Episode>& episodes,
                     double k_percent) {
  if (!(k_percent > 0.0) || k_percent > 100.0)
    throw ConfigError("accuracy_at_k: K must lie in (0, 100], got " +
                      std::to_string(k_percent));
  if (episodes.empty()) throw ConfigError("accuracy_at_k: empty eval set");
  const Index num_classes = model.config().num_classes;
  Index correct = 0, total = 0;
  for (const auto& ep : episodes) {
    if (!ep.clip_label)
      throw ConfigError("accuracy_at_k: episode without clip label");
    const Index len = ep.feature_steps();
    Index fed = static_cast<Index>(
        std::ceil(k_percent / 100.0 * static_cast<double>(len)));
    fed = std::max<Index>(1, std::min(fed, len));

    // the clip's actor node
    Index actor_node = -1;
    for (Index n = 0; n < ep.num_nodes(); ++n)
      if (ep.node_actor(n) == 0) actor_node = n;
    if (actor_node < 0) throw ConfigError("accuracy_at_k: clip has no actor");

    double best = -1.0;
    Index best_class = 0;
    for (Index s = 0; s < fed; ++s) {
      Prediction pred = model.rollout(Tensor::from_matrix(ep.feature_matrix(s)),
                                      ep.proposal_boxes());
      for (const auto& logits : pred.logits) {
        RowMat probs = model.probabilities(logits);
        for (Index c = 0; c < num_classes; ++c) {
          if (probs(actor_node, c) > best) {
            best = probs(actor_node, c);
            best_class = c;
          }
        }
      }
    }
    correct += best_class == *ep.clip_label ? 1 : 0;
    ++total;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

EvalReport evaluate(const Model& model, const std::vector<Episode>& episodes,
                    const std::vector<Index>& t_list,
                    const std::vector<double>& k_list) {
  EvalReport r;
  r.variant = to_string(model.config().variant);
  r.t_list = t_list;
  if (!t_list.empty()) {
    auto preds = predict_all(model, episodes);
    for (Index t : t_list) {
      MapResult m = map_at_t(preds, episodes, t);
      r.map_per_t.push_back(m.map);
      r.per_class.push_back(std::move(m.per_class));
    }
  }
  for (double k : k_list) {
    r.k_list.push_back(k);
    r.acc_per_k.push_back(accuracy_at_k(model, episodes, k));
  }
  return r;
}

namespace {

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

void write_report_csv(const std::string& path, const EvalReport& r) {
  std::string body = "series";
  for (Index t : r.t_list) body += ",t=" + std::to_string(t);
  body += "\n";
  if (!r.map_per_t.empty()) {
    body += "mAP";
    for (double v : r.map_per_t) body += "," + fmt(v);
    body += "\n";
    if (!r.per_class.empty()) {
      for (size_t c = 0; c < r.per_class[0].size(); ++c) {
        body += "class_" + std::to_string(r.per_class[0][c].cls);
        for (size_t ti = 0; ti < r.t_list.size(); ++ti) {
          const ClassAp& e = r.per_class[ti][c];
          body += ",";
          body += e.num_gt > 0 ? fmt(e.ap) : "";
        }
        body += "\n";
      }
    }
  }
  if (!r.k_list.empty()) {
    body += "series";
    for (double k : r.k_list) body += ",K=" + fmt(k);
    body += "\naccuracy";
    for (double a : r.acc_per_k) body += "," + fmt(a);
    body += "\n";
  }
  write_text_file(path, body);
}

void write_report_json(const std::string& path, const EvalReport& r) {
  json j;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  json map = json::object();
  for (size_t ti = 0; ti < r.t_list.size(); ++ti) {
    json entry;
    entry["map"] = r.map_per_t[ti];
    json classes = json::array();
    for (const ClassAp& e : r.per_class[ti]) {
      json ce;
      ce["class"] = e.cls;
      ce["num_gt"] = e.num_gt;
      if (e.num_gt > 0) ce["ap"] = e.ap;
      classes.push_back(std::move(ce));
    }
    entry["per_class"] = std::move(classes);
    map["t=" + std::to_string(r.t_list[ti])] = std::move(entry);
  }
  j["map_at_t"] = std::move(map);
  if (!r.k_list.empty()) {
    json acc = json::object();
    for (size_t i = 0; i < r.k_list.size(); ++i)
      acc["K=" + fmt(r.k_list[i])] = r.acc_per_k[i];
    j["accuracy_at_k"] = std::move(acc);
  }
  write_text_file(path, j.dump(2) + "\n");
}

void write_predictions_jsonl(const std::string& path,
                             const std::vector<EpisodePrediction>& preds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& p : preds) {
    json j;
    json boxes = json::array();
    for (const Box& b : p.boxes) boxes.push_back({b.cx, b.cy, b.w, b.h});
    j["boxes"] = std::move(boxes);
    json probs = json::array();
    for (const RowMat& m : p.probs) {
      json rows = json::array();
      for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        rows.push_back(std::move(row));
      }
      probs.push_back(std::move(rows));
    }
    j["probs"] = std::move(probs);
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<EpisodePrediction> read_predictions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<EpisodePrediction> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      EpisodePrediction p;
      for (const auto& jb : j.at("boxes"))
        p.boxes.push_back(Box{jb.at(0).get<double>(), jb.at(1).get<double>(),
                              jb.at(2).get<double>(), jb.at(3).get<double>()});
      for (const auto& jt : j.at("probs")) {
        RowMat m(jt.size(), jt.empty() ? 0 : jt[0].size());
        for (size_t i = 0; i < jt.size(); ++i)
          for (size_t c = 0; c < jt[i].size(); ++c)
            m(static_cast<Index>(i), static_cast<Index>(c)) =
                jt[i][c].get<double>();
        p.probs.push_back(std::move(m));
      }
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ConfigError("predictions line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return out;
}

} // namespace dr2n
