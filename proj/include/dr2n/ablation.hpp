#pragma once

#include <string>
#include <vector>

#include "dr2n/metrics.hpp"
#include "dr2n/trainer.hpp"

namespace dr2n {

/// One ablation study: each variant trained on identical seeded data for
/// each seed, then evaluated. In multi-actor mode the measurement is the
/// per-timestep mAP grid; in clip mode it is accuracy@K over k_list.
struct AblationConfig {
  std::vector<Variant> variants;
  Index num_seeds = 5;
  std::uint64_t base_seed = 1;
  WorldConfig world;
  ModelConfig model;  // variant field is overridden per run
  Schedule schedule;
  Index steps = 0;  // 0: full schedule
  Index batch_size = 3;
  Index train_episodes = 384;
  Index eval_episodes = 160;
  std::vector<double> k_list;  // clip mode only
  Index threads = 0;           // 0: DR2N_THREADS env, then hardware
  std::string config_hash;

  static AblationConfig defaults();       // Table-3-shaped study
  static AblationConfig clip_defaults();  // Table-4-shaped study
};

struct RunResult {
  Variant variant = Variant::Dr2n;
  Index seed_index = 0;
  std::uint64_t data_seed = 0;
  bool diverged = false;
  std::string divergence;
  std::vector<double> map_per_t;                // t = 0..T (multi-actor)
  std::vector<std::vector<ClassAp>> per_class;  // per t
  std::vector<double> acc_per_k;                // clip mode
  double final_loss = 0.0;
};

struct AblationResult {
  std::vector<Variant> variants;
  Index horizon = 0;
  std::vector<double> k_list;
  std::vector<RunResult> runs;  // variant-major, seed-minor

  const RunResult& run(Variant v, Index seed_index) const;
  /// Seed-mean mAP at one step; diverged runs are excluded.
  double mean_map(Variant v, Index t) const;
  /// Seed-mean accuracy at k_list[ki].
  double mean_acc(Variant v, Index ki) const;
  /// Per-seed values (skipping diverged runs).
  std::vector<double> seed_maps(Variant v, Index t) const;
  /// Seed-mean per-class AP at one step (NaN when a class has no GT).
  std::vector<double> mean_class_ap(Variant v, Index t) const;
};

AblationResult run_ablation(const AblationConfig& cfg);

/// Number of worker threads: explicit > DR2N_THREADS > hardware.
Index resolve_threads(Index requested, Index num_tasks);

void write_grid_csv(const std::string& path, const AblationResult& r,
                    const std::string& config_hash);
void write_runs_csv(const std::string& path, const AblationResult& r,
                    const std::string& config_hash);
/// Per-class AP drop from t=0 to t=1 (hardest-to-forecast classes).
void write_class_delta_time_csv(const std::string& path,
                                const AblationResult& r);
/// Per-class AP gain of dr2n over gru at each step (who benefits from
/// relational context).
void write_class_delta_graph_csv(const std::string& path,
                                 const AblationResult& r);

} // namespace dr2n
