// Command-line surface: dataset generation, training, evaluation, the
// ablation grid, and attention export. Exit codes: 0 success, 2 bad
// configuration or flags, 3 I/O failure, 4 numeric divergence.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dr2n/ablation.hpp"
#include "dr2n/attn_export.hpp"
#include "dr2n/checkpoint.hpp"
#include "dr2n/errors.hpp"
#include "dr2n/metrics.hpp"
#include "dr2n/run_config.hpp"

namespace {

using namespace dr2n;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

RunConfig load_run_config(const std::string& config_path) {
  return config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
}

std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stoll(cell));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse integer list entry '" + cell + "'");
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number list entry '" + cell + "'");
    }
  }
  return out;
}

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 Index count, std::uint64_t seed, bool seed_set,
                 Index count_set) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (count_set >= 0) cfg.count = count;
  cfg.validate();
  write_jsonl(out_path, cfg.world, cfg.count, cfg.seed, cfg.hash());
  std::cout << "wrote " << cfg.count << " episodes to " << out_path
            << " (config " << cfg.hash() << ", seed " << cfg.seed << ")\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_path, const std::string& variant,
              Index steps, std::uint64_t seed, bool seed_set,
              const std::string& loss_log_path, const std::string& resume) {
  RunConfig cfg = load_run_config(config_path);
  if (!variant.empty()) cfg.model.variant = parse_variant(variant);
  if (steps > 0) cfg.steps = steps;
  if (seed_set) cfg.seed = seed;
  cfg.validate();

  auto episodes = read_jsonl(data_path);
  if (episodes.empty()) throw ConfigError("dataset '" + data_path + "' is empty");

  ParamStore store;
  Rng init_rng(derive_seed(cfg.seed, "init"));
  Model model = Model::create(cfg.model, store, init_rng);

  TrainOptions opt;
  opt.steps = cfg.steps;
  opt.batch_size = cfg.batch_size;
  opt.seed = derive_seed(cfg.seed, "batches");
  if (!resume.empty()) {
    CheckpointMeta prev = restore_checkpoint_values(resume, store);
    opt.start_step = prev.step;
    if (prev.config_hash != cfg.hash())
      std::cerr << "warning: resuming from checkpoint with config "
                << prev.config_hash << ", current config is " << cfg.hash()
                << "\n";
  }

  std::ofstream log_file;
  std::ostream* log = nullptr;
  if (!loss_log_path.empty()) {
    log_file.open(loss_log_path);
    if (!log_file) throw IoError("cannot open '" + loss_log_path + "'");
    log_file << "step,lr,loss\n";
    log = &log_file;
  }

  Schedule sched = cfg.schedule;
  TrainResult result = train_model(model, store, episodes, sched, opt, log);

  CheckpointMeta meta;
  meta.config_hash = cfg.hash();
  meta.seed = cfg.seed;
  meta.step = result.last_step;
  meta.model = cfg.model;
  save_checkpoint(out_path, store, meta);
  std::cout << "trained " << to_string(cfg.model.variant) << " for "
            << result.losses.size() << " steps, final loss "
            << (result.losses.empty() ? 0.0 : result.losses.back())
            << ", checkpoint " << out_path << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& data_path, const std::string& t_spec,
             const std::string& k_spec, const std::string& out_prefix,
             const std::string& dump_preds, const std::string& from_preds) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  Model model = Model::attach(ckpt.meta.model, ckpt.store);
  if (!config_path.empty()) {
    RunConfig cfg = RunConfig::from_file(config_path);
    if (cfg.hash() != ckpt.meta.config_hash)
      std::cerr << "warning: config hash mismatch: checkpoint carries "
                << ckpt.meta.config_hash << ", --config gives " << cfg.hash()
                << "\n";
  }
  auto episodes = read_jsonl(data_path);
  if (episodes.empty()) throw ConfigError("dataset '" + data_path + "' is empty");

  std::vector<Index> t_list;
  if (!t_spec.empty()) t_list = parse_index_list(t_spec);
  std::vector<double> k_list;
  if (!k_spec.empty()) k_list = parse_double_list(k_spec);
  if (t_list.empty() && k_list.empty())
    for (Index t = 0; t <= ckpt.meta.model.horizon; ++t) t_list.push_back(t);

  EvalReport report;
  if (!from_preds.empty()) {
    if (!k_list.empty())
      throw ConfigError("--k-percent needs live rollouts; it cannot be "
                        "combined with --preds");
    auto preds = read_predictions_jsonl(from_preds);
    report.variant = to_string(ckpt.meta.model.variant);
    report.t_list = t_list;
    for (Index t : t_list) {
      MapResult m = map_from_predictions(preds, episodes, t);
      report.map_per_t.push_back(m.map);
      report.per_class.push_back(std::move(m.per_class));
    }
  } else {
    if (!dump_preds.empty())
      write_predictions_jsonl(dump_preds, predict_all(model, episodes));
    report = evaluate(model, episodes, t_list, k_list);
  }
  report.seed = ckpt.meta.seed;
  report.config_hash = ckpt.meta.config_hash;
  write_report_csv(out_prefix + ".csv", report);
  write_report_json(out_prefix + ".json", report);
  std::cout << "report written to " << out_prefix << ".csv / .json\n";
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, Index seeds,
               const std::string& out_dir, const std::string& mode) {
  RunConfig cfg = load_run_config(config_path);
  if (!mode.empty()) cfg.world.mode = parse_world_mode(mode);
  cfg.sync();
  cfg.validate();

  const bool clip = cfg.world.mode == WorldMode::SingleActorClip;
  AblationConfig ac =
      clip ? AblationConfig::clip_defaults() : AblationConfig::defaults();
  ac.world = cfg.world;
  ac.model = cfg.model;
  ac.schedule = cfg.schedule;
  ac.steps = cfg.steps;
  ac.batch_size = cfg.batch_size;
  ac.num_seeds = seeds > 0 ? seeds : cfg.num_seeds;
  ac.base_seed = cfg.seed;
  ac.train_episodes = cfg.train_episodes;
  ac.eval_episodes = cfg.eval_episodes;
  ac.threads = cfg.threads;
  ac.config_hash = cfg.hash();

  AblationResult result = run_ablation(ac);
  write_grid_csv(out_dir + "/grid.csv", result, ac.config_hash);
  write_runs_csv(out_dir + "/runs.csv", result, ac.config_hash);
  if (!clip) {
    write_class_delta_time_csv(out_dir + "/class_delta_time.csv", result);
    bool have_pair = false, have_gru = false;
    for (Variant v : result.variants) {
      have_pair |= v == Variant::Dr2n;
      have_gru |= v == Variant::Gru;
    }
    if (have_pair && have_gru)
      write_class_delta_graph_csv(out_dir + "/class_delta_graph.csv", result);
  }

  Index diverged = 0;
  for (const auto& r : result.runs) diverged += r.diverged ? 1 : 0;
  std::cout << "ablation complete: " << result.runs.size() << " runs, "
            << diverged << " diverged; grid in " << out_dir << "/grid.csv\n";
  for (Variant v : result.variants) {
    std::cout << "  " << to_string(v) << ":";
    if (clip) {
      for (size_t ki = 0; ki < result.k_list.size(); ++ki)
        std::cout << " " << result.mean_acc(v, static_cast<Index>(ki));
    } else {
      for (Index t = 0; t <= result.horizon; ++t)
        std::cout << " " << result.mean_map(v, t);
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_attn(const std::string& ckpt_path, const std::string& data_path,
             Index episode_index, Index node, Index top_k,
             const std::string& out_json, const std::string& out_dot) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  if (!is_relational(ckpt.meta.model.variant) ||
      ckpt.meta.model.variant == Variant::Rn)
    throw ConfigError("variant " + to_string(ckpt.meta.model.variant) +
                      " has no learned attention to export");
  Model model = Model::attach(ckpt.meta.model, ckpt.store);
  auto episodes = read_jsonl(data_path);
  if (episode_index < 0 || episode_index >= static_cast<Index>(episodes.size()))
    throw ConfigError("episode index " + std::to_string(episode_index) +
                      " out of range for " + std::to_string(episodes.size()) +
                      " episodes");
  const Episode& ep = episodes[episode_index];
  Prediction pred =
      model.rollout(Tensor::from_matrix(ep.feature_matrix(0)),
                    ep.proposal_boxes(), /*capture_attention=*/true);
  auto records = top_k_attention(pred, node, top_k);
  write_attention_json(out_json, records, ckpt.meta.config_hash, episode_index,
                       node, top_k);
  if (!out_dot.empty())
    write_attention_dot(out_dot, records, ep.num_nodes());
  std::cout << "exported " << records.size() << " attention edges to "
            << out_json << (out_dot.empty() ? "" : " and " + out_dot) << "\n";
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dr2n: graph-attention recurrent forecasting of multi-agent actions on "
      "a synthetic world.\nThread count for the ablation runner comes from "
      "DR2N_THREADS when set."};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, ckpt_path, variant, loss_log;
  std::string resume, t_spec, k_spec, dump_preds, from_preds, mode, out_dot;
  std::uint64_t seed = 0;
  Index count = -1, steps = 0, seeds = 0, episode_index = 0, node = 0, top_k = 3;

  auto* gen = app.add_subcommand("generate", "Write a JSONL episode dataset");
  gen->add_option("--config", config_path, "flat key=value run config");
  gen->add_option("--out", out_path, "output JSONL path")->required();
  gen->add_option("--count", count, "number of episodes (default from config)");
  auto* gen_seed = gen->add_option("--seed", seed, "base seed");

  auto* train = app.add_subcommand("train", "Train a variant on a dataset");
  train->add_option("--config", config_path, "flat key=value run config");
  train->add_option("--data", data_path, "training JSONL")->required();
  train->add_option("--out", out_path, "checkpoint path")->required();
  train->add_option("--variant", variant,
                    "single-head|multi-head|gru|rn|gat|dr2n");
  train->add_option("--steps", steps, "training steps (default: full schedule)");
  auto* train_seed = train->add_option("--seed", seed, "run seed");
  train->add_option("--loss-log", loss_log, "per-step CSV loss log");
  train->add_option("--resume", resume, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--config", config_path, "config for hash verification");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  eval->add_option("--data", data_path, "evaluation JSONL")->required();
  eval->add_option("--t", t_spec, "comma list of future steps, e.g. 0,1,5");
  eval->add_option("--k-percent", k_spec,
                   "comma list of clip prefixes, e.g. 10,20,50");
  eval->add_option("--out", out_path, "report path prefix")->required();
  eval->add_option("--dump-preds", dump_preds, "save raw predictions JSONL");
  eval->add_option("--preds", from_preds, "evaluate saved predictions instead");

  auto* ablate = app.add_subcommand("ablate", "Train and compare all variants");
  ablate->add_option("--config", config_path, "flat key=value run config");
  ablate->add_option("--seeds", seeds, "seeds per variant");
  ablate->add_option("--out", out_path, "output directory")->required();
  ablate->add_option("--mode", mode, "multi-actor|single-actor-clip");

  auto* attn = app.add_subcommand("attn", "Export top-k attention edges");
  attn->add_option("--checkpoint", ckpt_path, "dr2n/gat checkpoint")->required();
  attn->add_option("--data", data_path, "episode JSONL")->required();
  attn->add_option("--episode", episode_index, "episode index");
  attn->add_option("--node", node, "node whose attention to export");
  attn->add_option("--top-k", top_k, "edges per step");
  attn->add_option("--out", out_path, "JSON output path")->required();
  attn->add_option("--dot", out_dot, "DOT digraph output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed())
      return cmd_generate(config_path, out_path, count, seed,
                          !gen_seed->empty(), count);
    if (train->parsed())
      return cmd_train(config_path, data_path, out_path, variant, steps, seed,
                       !train_seed->empty(), loss_log, resume);
    if (eval->parsed())
      return cmd_eval(config_path, ckpt_path, data_path, t_spec, k_spec,
                      out_path, dump_preds, from_preds);
    if (ablate->parsed())
      return cmd_ablate(config_path, seeds, out_path, mode);
    if (attn->parsed())
      return cmd_attn(ckpt_path, data_path, episode_index, node, top_k,
                      out_path, out_dot);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
