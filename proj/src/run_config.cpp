#include "dr2n/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dr2n/errors.hpp"

namespace dr2n {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v +
                      "'");
  }
}

Index to_index(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<Index>(n);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" +
                      v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key +
                      "' expects an unsigned integer, got '" + v + "'");
  }
}

// rows separated by ';', entries by ','
RowMat to_matrix(const std::string& key, const std::string& v) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(v);
  std::string row;
  while (std::getline(ss, row, ';')) {
    rows.emplace_back();
    std::stringstream rs(row);
    std::string cell;
    while (std::getline(rs, cell, ','))
      rows.back().push_back(to_double(key, trim(cell)));
  }
  if (rows.empty()) throw ConfigError("config: key '" + key + "' is empty");
  RowMat m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw ConfigError("config: key '" + key + "' has ragged rows");
    for (size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(static_cast<int>(to_index(key, trim(cell))));
  return out;
}

std::string matrix_str(const RowMat& m) {
  std::string out;
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    if (i) out += ";";
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ",";
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out += buf;
    }
  }
  return out;
}

std::string num_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string int_list_str(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

} // namespace

std::map<std::string, std::string> parse_flat_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    if (kv.count(key))
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

RunConfig::RunConfig() {
  world = WorldConfig::defaults();
  sync();
}

void RunConfig::sync() {
  model.num_classes = world.num_classes;
  model.horizon = world.horizon;
  model.hidden_dim = world.feature_dim;
  model.history = world.clip_length;
}

void RunConfig::validate() const {
  world.validate();
  model.validate();
  schedule.validate();
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (count < 0) throw ConfigError("config: count must be >= 0");
}

void RunConfig::apply_pairs(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, v] : kv) {
    if (key == "world.num_classes") world.num_classes = to_index(key, v);
    else if (key == "world.horizon") world.horizon = to_index(key, v);
    else if (key == "world.feature_dim") world.feature_dim = to_index(key, v);
    else if (key == "world.n_true_min") world.n_true_min = to_index(key, v);
    else if (key == "world.n_true_max") world.n_true_max = to_index(key, v);
    else if (key == "world.n_fake_min") world.n_fake_min = to_index(key, v);
    else if (key == "world.n_fake_max") world.n_fake_max = to_index(key, v);
    else if (key == "world.distractor_rate") world.distractor_rate = to_double(key, v);
    else if (key == "world.interaction_radius") world.interaction_radius = to_double(key, v);
    else if (key == "world.interact_prob") world.interact_prob = to_double(key, v);
    else if (key == "world.solo_table") world.solo_table = to_matrix(key, v);
    else if (key == "world.pair_table") world.pair_table = to_matrix(key, v);
    else if (key == "world.trigger_classes") world.trigger_classes = to_int_list(key, v);
    else if (key == "world.feature_noise") world.feature_noise = to_double(key, v);
    else if (key == "world.distractor_noise") world.distractor_noise = to_double(key, v);
    else if (key == "world.box_min") world.box_min = to_double(key, v);
    else if (key == "world.box_max") world.box_max = to_double(key, v);
    else if (key == "world.proposal_jitter") world.proposal_jitter = to_double(key, v);
    else if (key == "world.mode") world.mode = parse_world_mode(v);
    else if (key == "world.clip_length") world.clip_length = to_index(key, v);
    else if (key == "world.clip_context_min") world.clip_context_min = to_index(key, v);
    else if (key == "world.clip_context_max") world.clip_context_max = to_index(key, v);
    else if (key == "world.clip_ambiguity") world.clip_ambiguity = to_double(key, v);
    else if (key == "world.context_noise") world.context_noise = to_double(key, v);
    else if (key == "world.embed_seed") world.embed_seed = to_u64(key, v);
    else if (key == "model.variant") model.variant = parse_variant(v);
    else if (key == "model.edge_dim") model.edge_dim = to_index(key, v);
    else if (key == "model.cls_hidden") model.cls_hidden = to_index(key, v);
    else if (key == "model.loss_mode") model.loss_mode = parse_loss_mode(v);
    else if (key == "model.loc_weight") model.loc_weight = to_double(key, v);
    else if (key == "model.beta_start") model.beta_start = to_double(key, v);
    else if (key == "model.beta_end") model.beta_end = to_double(key, v);
    else if (key == "model.node_activation") model.node_activation = parse_activation(v);
    else if (key == "schedule.warmup_steps") schedule.warmup_steps = to_index(key, v);
    else if (key == "schedule.cosine_steps") schedule.cosine_steps = to_index(key, v);
    else if (key == "schedule.lr_start") schedule.lr_start = to_double(key, v);
    else if (key == "schedule.lr_peak") schedule.lr_peak = to_double(key, v);
    else if (key == "seed") seed = to_u64(key, v);
    else if (key == "steps") steps = to_index(key, v);
    else if (key == "batch_size") batch_size = to_index(key, v);
    else if (key == "count") count = to_index(key, v);
    else if (key == "num_seeds") num_seeds = to_index(key, v);
    else if (key == "train_episodes") train_episodes = to_index(key, v);
    else if (key == "eval_episodes") eval_episodes = to_index(key, v);
    else if (key == "threads") threads = to_index(key, v);
    else
      throw ConfigError("config: unknown key '" + key + "'");
  }
  sync();
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  RunConfig cfg;
  cfg.apply_pairs(parse_flat_kv(text));
  return cfg;
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["world.num_classes"] = std::to_string(world.num_classes);
  kv["world.horizon"] = std::to_string(world.horizon);
  kv["world.feature_dim"] = std::to_string(world.feature_dim);
  kv["world.n_true_min"] = std::to_string(world.n_true_min);
  kv["world.n_true_max"] = std::to_string(world.n_true_max);
  kv["world.n_fake_min"] = std::to_string(world.n_fake_min);
  kv["world.n_fake_max"] = std::to_string(world.n_fake_max);
  kv["world.distractor_rate"] = num_str(world.distractor_rate);
  kv["world.interaction_radius"] = num_str(world.interaction_radius);
  kv["world.interact_prob"] = num_str(world.interact_prob);
  kv["world.solo_table"] = matrix_str(world.solo_table);
  kv["world.pair_table"] = matrix_str(world.pair_table);
  kv["world.trigger_classes"] = int_list_str(world.trigger_classes);
  kv["world.feature_noise"] = num_str(world.feature_noise);
  kv["world.distractor_noise"] = num_str(world.distractor_noise);
  kv["world.box_min"] = num_str(world.box_min);
  kv["world.box_max"] = num_str(world.box_max);
  kv["world.proposal_jitter"] = num_str(world.proposal_jitter);
  kv["world.mode"] = to_string(world.mode);
  kv["world.clip_length"] = std::to_string(world.clip_length);
  kv["world.clip_context_min"] = std::to_string(world.clip_context_min);
  kv["world.clip_context_max"] = std::to_string(world.clip_context_max);
  kv["world.clip_ambiguity"] = num_str(world.clip_ambiguity);
  kv["world.context_noise"] = num_str(world.context_noise);
  kv["world.embed_seed"] = std::to_string(world.embed_seed);
  kv["model.variant"] = to_string(model.variant);
  kv["model.edge_dim"] = std::to_string(model.edge_dim);
  kv["model.cls_hidden"] = std::to_string(model.cls_hidden);
  kv["model.loss_mode"] = to_string(model.loss_mode);
  kv["model.loc_weight"] = num_str(model.loc_weight);
  kv["model.beta_start"] = num_str(model.beta_start);
  kv["model.beta_end"] = num_str(model.beta_end);
  kv["model.node_activation"] = to_string(model.node_activation);
  kv["schedule.warmup_steps"] = std::to_string(schedule.warmup_steps);
  kv["schedule.cosine_steps"] = std::to_string(schedule.cosine_steps);
  kv["schedule.lr_start"] = num_str(schedule.lr_start);
  kv["schedule.lr_peak"] = num_str(schedule.lr_peak);
  kv["seed"] = std::to_string(seed);
  kv["steps"] = std::to_string(steps);
  kv["batch_size"] = std::to_string(batch_size);
  kv["count"] = std::to_string(count);
  kv["num_seeds"] = std::to_string(num_seeds);
  kv["train_episodes"] = std::to_string(train_episodes);
  kv["eval_episodes"] = std::to_string(eval_episodes);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

} // namespace dr2n
