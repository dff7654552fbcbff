#pragma once

#include <iosfwd>
#include <vector>

#include "dr2n/model.hpp"
#include "dr2n/param_store.hpp"
#include "dr2n/synthworld.hpp"

namespace dr2n {

/// Learning-rate schedule: linear warm start lr_start -> lr_peak over
/// warmup_steps, then cosine decay to zero over cosine_steps.
struct Schedule {
  Index warmup_steps = 200;
  Index cosine_steps = 5000;
  double lr_start = 0.008;
  double lr_peak = 0.08;

  double lr(Index step) const;
  Index total_steps() const { return warmup_steps + cosine_steps; }
  void validate() const;
};

/// p <- p - lr(step) * grad_multiplier * grad, then gradients are cleared.
/// A non-finite gradient aborts, naming the parameter.
void sgd_step(ParamStore& store, const Schedule& schedule, Index step);

struct TrainOptions {
  Index steps = 0;       // 0: run the full schedule
  Index batch_size = 4;
  std::uint64_t seed = 1;
  Index start_step = 0;  // resume point; batches are a pure function of
                         // (seed, step), so resumed runs replay exactly
};

struct TrainResult {
  std::vector<double> losses;  // batch-mean loss per step
  std::vector<double> lrs;
  Index last_step = 0;         // one past the final executed step
};

/// Minibatch SGD over the episode set. Episodes are drawn per step from a
/// stream derived from (seed, step). In clip mode the fed feature step is
/// sampled the same way. The optional log stream receives one
/// "step,lr,loss" line per step at full float precision.
TrainResult train_model(const Model& model, ParamStore& store,
                        const std::vector<Episode>& data,
                        const Schedule& schedule, const TrainOptions& opt,
                        std::ostream* loss_log = nullptr);

} // namespace dr2n
