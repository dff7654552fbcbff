#include "dr2n/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "dr2n/errors.hpp"

namespace dr2n {

void Schedule::validate() const {
  if (warmup_steps < 1 || cosine_steps < 1)
    throw ConfigError("schedule: warmup and cosine spans must be >= 1");
  if (lr_start < 0.0 || lr_peak <= 0.0)
    throw ConfigError("schedule: learning rates must be positive");
}

double Schedule::lr(Index step) const {
  if (step < 0) throw ConfigError("schedule: negative step");
  if (step < warmup_steps) {
    return lr_start + (lr_peak - lr_start) * static_cast<double>(step) /
                          static_cast<double>(warmup_steps);
  }
  if (step >= warmup_steps + cosine_steps) return 0.0;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(cosine_steps);
  return lr_peak * 0.5 * (1.0 + std::cos(M_PI * progress));
}

void sgd_step(ParamStore& store, const Schedule& schedule, Index step) {
  const double lr = schedule.lr(step);
  for (const auto& name : store.names()) {
    Tensor p = store.get(name);
    if (!p.has_grad()) continue;
    const Vec g = p.grad();
    for (Index i = 0; i < g.size(); ++i)
      if (!std::isfinite(g(i)))
        throw NumericError("non-finite gradient in parameter '" + name +
                           "' at step " + std::to_string(step));
    p.values_mut() -= lr * store.grad_multiplier(name) * g;
    p.zero_grad();
  }
}

TrainResult train_model(const Model& model, ParamStore& store,
                        const std::vector<Episode>& data,
                        const Schedule& schedule, const TrainOptions& opt,
                        std::ostream* loss_log) {
  schedule.validate();
  if (data.empty()) throw ConfigError("train: empty dataset");
  if (opt.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  const Index steps = opt.steps > 0 ? opt.steps : schedule.total_steps();

  TrainResult result;
  for (Index step = opt.start_step; step < steps; ++step) {
    // batches are a pure function of (seed, step): resume replays exactly
    Rng batch_rng(derive_seed(opt.seed, static_cast<std::uint64_t>(step)));
    Tensor total;
    for (Index b = 0; b < opt.batch_size; ++b) {
      const Index idx =
          batch_rng.uniform_int(0, static_cast<Index>(data.size()) - 1);
      const Episode& ep = data[idx];
      const Index feat_steps = ep.feature_steps();
      const Index s =
          feat_steps > 1 ? batch_rng.uniform_int(0, feat_steps - 1) : 0;
      Prediction pred = model.rollout(
          Tensor::from_matrix(ep.feature_matrix(s)), ep.proposal_boxes());
      Tensor l = model.loss(pred, ep);
      total = b == 0 ? l : add(total, l);
    }
    Tensor loss = mul(total, 1.0 / static_cast<double>(opt.batch_size));
    const double loss_value = loss.scalar_value();
    if (!std::isfinite(loss_value))
      throw NumericError("loss diverged at step " + std::to_string(step));
    loss.backward();
    sgd_step(store, schedule, step);

    const double lr = schedule.lr(step);
    result.losses.push_back(loss_value);
    result.lrs.push_back(lr);
    if (loss_log) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g\n",
                    static_cast<long long>(step), lr, loss_value);
      *loss_log << buf;
    }
    result.last_step = step + 1;
  }
  return result;
}

} // namespace dr2n
