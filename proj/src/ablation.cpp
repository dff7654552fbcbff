#include "dr2n/ablation.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <thread>

#include "dr2n/errors.hpp"

namespace dr2n {

AblationConfig AblationConfig::defaults() {
  AblationConfig c;
  c.variants = {Variant::SingleHead, Variant::MultiHead, Variant::Gru,
                Variant::Rn,         Variant::Gat,       Variant::Dr2n};
  c.world = WorldConfig::defaults();
  c.model.num_classes = c.world.num_classes;
  c.model.horizon = c.world.horizon;
  c.model.hidden_dim = c.world.feature_dim;
  return c;
}

AblationConfig AblationConfig::clip_defaults() {
  AblationConfig c;
  c.variants = {Variant::Gru, Variant::Gat, Variant::Dr2n};
  c.world = WorldConfig::clip_defaults();
  c.model.num_classes = c.world.num_classes;
  c.model.horizon = c.world.horizon;
  c.model.hidden_dim = c.world.feature_dim;
  c.model.history = c.world.clip_length;
  c.k_list = {10, 20, 30, 40, 50};
  return c;
}

Index resolve_threads(Index requested, Index num_tasks) {
  Index n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("DR2N_THREADS")) n = std::atoll(env);
  }
  if (n <= 0) n = static_cast<Index>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  return std::max<Index>(1, std::min(n, std::max<Index>(1, num_tasks)));
}

namespace {

std::vector<Episode> make_dataset(const WorldConfig& world, std::uint64_t seed,
                                  Index count) {
  std::vector<Episode> out;
  out.reserve(count);
  for (Index i = 0; i < count; ++i)
    out.push_back(generate(world, derive_seed(seed, static_cast<std::uint64_t>(i))));
  return out;
}

RunResult run_one(const AblationConfig& cfg, Variant variant, Index seed_index) {
  RunResult r;
  r.variant = variant;
  r.seed_index = seed_index;
  r.data_seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(seed_index));

  // identical data and batch stream for every variant of this seed
  const std::uint64_t train_data_seed = derive_seed(r.data_seed, "train-data");
  const std::uint64_t eval_data_seed = derive_seed(r.data_seed, "eval-data");
  const std::uint64_t init_seed = derive_seed(r.data_seed, "init");
  const std::uint64_t stream_seed = derive_seed(r.data_seed, "batches");

  auto train_set = make_dataset(cfg.world, train_data_seed, cfg.train_episodes);
  auto eval_set = make_dataset(cfg.world, eval_data_seed, cfg.eval_episodes);

  ModelConfig mc = cfg.model;
  mc.variant = variant;
  ParamStore store;
  Rng init_rng(init_seed);
  Model model = Model::create(mc, store, init_rng);

  TrainOptions opt;
  opt.steps = cfg.steps;
  opt.batch_size = cfg.batch_size;
  opt.seed = stream_seed;
  try {
    TrainResult tr = train_model(model, store, train_set, cfg.schedule, opt);
    r.final_loss = tr.losses.empty() ? 0.0 : tr.losses.back();
  } catch (const NumericError& e) {
    r.diverged = true;
    r.divergence = e.what();
    return r;
  }

  if (cfg.world.mode == WorldMode::MultiActor) {
    auto preds = predict_all(model, eval_set);
    for (Index t = 0; t <= mc.horizon; ++t) {
      MapResult m = map_at_t(preds, eval_set, t);
      r.map_per_t.push_back(m.map);
      r.per_class.push_back(std::move(m.per_class));
    }
  } else {
    for (double k : cfg.k_list)
      r.acc_per_k.push_back(accuracy_at_k(model, eval_set, k));
  }
  return r;
}

} // namespace

AblationResult run_ablation(const AblationConfig& cfg) {
  if (cfg.num_seeds < 1) throw ConfigError("ablation: need at least one seed");
  if (cfg.variants.empty()) throw ConfigError("ablation: no variants");
  AblationResult result;
  result.variants = cfg.variants;
  result.horizon = cfg.model.horizon;
  result.k_list = cfg.k_list;
  const Index n_runs =
      static_cast<Index>(cfg.variants.size()) * cfg.num_seeds;
  result.runs.resize(n_runs);

  std::atomic<Index> next{0};
  const Index n_threads = resolve_threads(cfg.threads, n_runs);
  auto worker = [&]() {
    for (;;) {
      const Index i = next.fetch_add(1);
      if (i >= n_runs) return;
      const Variant v = cfg.variants[i / cfg.num_seeds];
      const Index seed_index = i % cfg.num_seeds;
      result.runs[i] = run_one(cfg, v, seed_index);
    }
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (Index k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return result;
}

const RunResult& AblationResult::run(Variant v, Index seed_index) const {
  for (const auto& r : runs)
    if (r.variant == v && r.seed_index == seed_index) return r;
  throw ConfigError("ablation: no run for variant " + to_string(v) + " seed " +
                    std::to_string(seed_index));
}

std::vector<double> AblationResult::seed_maps(Variant v, Index t) const {
  std::vector<double> out;
  for (const auto& r : runs)
    if (r.variant == v && !r.diverged &&
        t < static_cast<Index>(r.map_per_t.size()))
      out.push_back(r.map_per_t[t]);
  return out;
}

double AblationResult::mean_map(Variant v, Index t) const {
  const auto vals = seed_maps(v, t);
  if (vals.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (double x : vals) s += x;
  return s / static_cast<double>(vals.size());
}

double AblationResult::mean_acc(Variant v, Index ki) const {
  double s = 0;
  Index n = 0;
  for (const auto& r : runs)
    if (r.variant == v && !r.diverged &&
        ki < static_cast<Index>(r.acc_per_k.size())) {
      s += r.acc_per_k[ki];
      ++n;
    }
  return n > 0 ? s / static_cast<double>(n)
               : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> AblationResult::mean_class_ap(Variant v, Index t) const {
  std::vector<double> sums;
  std::vector<Index> counts;
  for (const auto& r : runs) {
    if (r.variant != v || r.diverged || t >= static_cast<Index>(r.per_class.size()))
      continue;
    const auto& cls = r.per_class[t];
    if (sums.empty()) {
      sums.assign(cls.size(), 0.0);
      counts.assign(cls.size(), 0);
    }
    for (size_t c = 0; c < cls.size(); ++c) {
      if (cls[c].num_gt == 0) continue;
      sums[c] += cls[c].ap;
      counts[c] += 1;
    }
  }
  std::vector<double> out(sums.size(),
                          std::numeric_limits<double>::quiet_NaN());
  for (size_t c = 0; c < sums.size(); ++c)
    if (counts[c] > 0) out[c] = sums[c] / static_cast<double>(counts[c]);
  return out;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace

void write_grid_csv(const std::string& path, const AblationResult& r,
                    const std::string& config_hash) {
  std::string body = "# config_hash=" + config_hash + "\nvariant";
  if (r.k_list.empty()) {
    for (Index t = 0; t <= r.horizon; ++t) body += ",t=" + std::to_string(t);
    body += "\n";
    for (Variant v : r.variants) {
      body += to_string(v);
      for (Index t = 0; t <= r.horizon; ++t)
        body += "," + fmt(r.mean_map(v, t));
      body += "\n";
    }
  } else {
    for (double k : r.k_list) body += ",K=" + std::to_string(int(k)) + "%";
    body += "\n";
    for (Variant v : r.variants) {
      body += to_string(v);
      for (size_t ki = 0; ki < r.k_list.size(); ++ki)
        body += "," + fmt(r.mean_acc(v, static_cast<Index>(ki)));
      body += "\n";
    }
  }
  write_text_file(path, body);
}

void write_runs_csv(const std::string& path, const AblationResult& r,
                    const std::string& config_hash) {
  std::string body = "# config_hash=" + config_hash +
                     "\nvariant,seed_index,data_seed,diverged";
  if (r.k_list.empty()) {
    for (Index t = 0; t <= r.horizon; ++t) body += ",t=" + std::to_string(t);
  } else {
    for (double k : r.k_list) body += ",K=" + std::to_string(int(k)) + "%";
  }
  body += "\n";
  for (const auto& run : r.runs) {
    body += to_string(run.variant) + "," + std::to_string(run.seed_index) + "," +
            std::to_string(run.data_seed) + "," + (run.diverged ? "1" : "0");
    const auto& vals = r.k_list.empty() ? run.map_per_t : run.acc_per_k;
    const size_t want = r.k_list.empty() ? static_cast<size_t>(r.horizon + 1)
                                         : r.k_list.size();
    for (size_t i = 0; i < want; ++i)
      body += "," + (i < vals.size() ? fmt(vals[i]) : std::string("nan"));
    body += "\n";
  }
  write_text_file(path, body);
}

void write_class_delta_time_csv(const std::string& path,
                                const AblationResult& r) {
  std::string body = "class";
  for (Variant v : r.variants) body += "," + to_string(v);
  body += "\n";
  std::vector<std::vector<double>> t0, t1;
  for (Variant v : r.variants) {
    t0.push_back(r.mean_class_ap(v, 0));
    t1.push_back(r.mean_class_ap(v, 1));
  }
  const size_t n_cls = t0.empty() ? 0 : t0[0].size();
  for (size_t c = 0; c < n_cls; ++c) {
    body += std::to_string(c);
    for (size_t vi = 0; vi < r.variants.size(); ++vi)
      body += "," + fmt(t0[vi][c] - t1[vi][c]);
    body += "\n";
  }
  write_text_file(path, body);
}

void write_class_delta_graph_csv(const std::string& path,
                                 const AblationResult& r) {
  std::string body = "class";
  for (Index t = 0; t <= r.horizon; ++t) body += ",t=" + std::to_string(t);
  body += "\n";
  std::vector<std::vector<double>> dr, gru;
  for (Index t = 0; t <= r.horizon; ++t) {
    dr.push_back(r.mean_class_ap(Variant::Dr2n, t));
    gru.push_back(r.mean_class_ap(Variant::Gru, t));
  }
  const size_t n_cls = dr.empty() ? 0 : dr[0].size();
  for (size_t c = 0; c < n_cls; ++c) {
    body += std::to_string(c);
    for (Index t = 0; t <= r.horizon; ++t)
      body += "," + fmt(dr[t][c] - gru[t][c]);
    body += "\n";
  }
  write_text_file(path, body);
}

} // namespace dr2n
