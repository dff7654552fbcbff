#pragma once

#include <string>
#include <vector>

#include "dr2n/model.hpp"
#include "dr2n/synthworld.hpp"

namespace dr2n {

/// Plain-value forward outputs for one episode: refined boxes plus class
/// probabilities per timestep.
struct EpisodePrediction {
  std::vector<Box> boxes;
  std::vector<RowMat> probs;  // t = 0..T, each N x (A+1)
};

EpisodePrediction predict_episode(const Model& model, const Episode& ep);
std::vector<EpisodePrediction> predict_all(const Model& model,
                                           const std::vector<Episode>& eps);

struct ClassAp {
  int cls = 0;
  Index num_gt = 0;
  double ap = 0.0;  // meaningful only when num_gt > 0
};

struct MapResult {
  double map = 0.0;  // unweighted mean over classes with >= 1 GT instance
  std::vector<ClassAp> per_class;
};

/// Frame-level mean AP at one future step. A detection is a true positive
/// when its refined box overlaps an unmatched ground-truth actor's observed
/// box with IoU above the threshold and the actor's action label at time t
/// equals the detection's class. Detections are ranked by score across the
/// whole eval set and matched greedily; AP integrates the interpolated
/// precision envelope.
MapResult map_at_t(const std::vector<EpisodePrediction>& preds,
                   const std::vector<Episode>& episodes, Index t,
                   double iou_thresh = 0.5);

/// Early-classification accuracy: feed the first ceil(K% * len) feature
/// steps of each clip, score every (fed step, output step, action class)
/// triple by predicted probability of the clip's actor node, and label the
/// clip with the most confident prediction.
double accuracy_at_k(const Model& model, const std::vector<Episode>& episodes,
                     double k_percent);

/// Evaluation summary, serializable to CSV (grid) and JSON (full detail).
struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<Index> t_list;
  std::vector<double> map_per_t;                // parallel to t_list
  std::vector<std::vector<ClassAp>> per_class;  // parallel to t_list
  std::vector<double> k_list;                   // percentages, clip mode
  std::vector<double> acc_per_k;                // parallel to k_list
};

EvalReport evaluate(const Model& model, const std::vector<Episode>& episodes,
                    const std::vector<Index>& t_list,
                    const std::vector<double>& k_list);

void write_report_csv(const std::string& path, const EvalReport& r);
void write_report_json(const std::string& path, const EvalReport& r);

/// Prediction dump / reload, for evaluating saved predictions on a second
/// path. JSONL, one episode per line, bit-exact doubles.
void write_predictions_jsonl(const std::string& path,
                             const std::vector<EpisodePrediction>& preds);
std::vector<EpisodePrediction> read_predictions_jsonl(const std::string& path);

/// map_at_t over already-materialized predictions (saved-predictions path).
MapResult map_from_predictions(const std::vector<EpisodePrediction>& preds,
                               const std::vector<Episode>& episodes, Index t,
                               double iou_thresh = 0.5);

} // namespace dr2n
