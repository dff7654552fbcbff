#include "dr2n/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "dr2n/errors.hpp"

namespace dr2n {

using nlohmann::json;

namespace {

json model_config_json(const ModelConfig& cfg) {
  json j;
  j["variant"] = to_string(cfg.variant);
  j["num_classes"] = cfg.num_classes;
  j["horizon"] = cfg.horizon;
  j["history"] = cfg.history;
  j["hidden_dim"] = cfg.hidden_dim;
  j["edge_dim"] = cfg.edge_dim;
  j["cls_hidden"] = cfg.cls_hidden;
  j["loss_mode"] = to_string(cfg.loss_mode);
  j["loc_weight"] = cfg.loc_weight;
  j["beta_start"] = cfg.beta_start;
  j["beta_end"] = cfg.beta_end;
  j["node_activation"] = to_string(cfg.node_activation);
  return j;
}

ModelConfig model_config_parse(const json& j) {
  ModelConfig cfg;
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  cfg.num_classes = j.at("num_classes").get<Index>();
  cfg.horizon = j.at("horizon").get<Index>();
  cfg.history = j.at("history").get<Index>();
  cfg.hidden_dim = j.at("hidden_dim").get<Index>();
  cfg.edge_dim = j.at("edge_dim").get<Index>();
  cfg.cls_hidden = j.at("cls_hidden").get<Index>();
  cfg.loss_mode = parse_loss_mode(j.at("loss_mode").get<std::string>());
  cfg.loc_weight = j.at("loc_weight").get<double>();
  cfg.beta_start = j.at("beta_start").get<double>();
  cfg.beta_end = j.at("beta_end").get<double>();
  cfg.node_activation =
      parse_activation(j.at("node_activation").get<std::string>());
  return cfg;
}

json checkpoint_json(const ParamStore& store, const CheckpointMeta& meta) {
  json j;
  j["format"] = "dr2n-checkpoint-v1";
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed;
  j["step"] = meta.step;
  j["model"] = model_config_json(meta.model);
  json params = json::object();
  json order = json::array();
  for (const auto& name : store.names()) {
    Tensor t = store.get(name);
    json p;
    p["shape"] = t.shape();
    json vals = json::array();
    for (Index i = 0; i < t.size(); ++i) vals.push_back(t.values()(i));
    p["values"] = std::move(vals);
    p["grad_multiplier"] = store.grad_multiplier(name);
    params[name] = std::move(p);
    order.push_back(name);
  }
  j["params"] = std::move(params);
  j["param_order"] = std::move(order);
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return j;
}

Vec values_from_json(const json& p, const std::string& name) {
  const auto& vals = p.at("values");
  Vec v(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) v(static_cast<Index>(i)) = vals[i].get<double>();
  Shape shape = p.at("shape").get<Shape>();
  if (shape_size(shape) != v.size())
    throw ConfigError("checkpoint parameter '" + name + "' shape/value mismatch");
  return v;
}

} // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const CheckpointMeta& meta) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << checkpoint_json(store, meta).dump() << "\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  json j = read_json_file(path);
  try {
    if (j.at("format").get<std::string>() != "dr2n-checkpoint-v1")
      throw ConfigError("unknown checkpoint format in '" + path + "'");
    LoadedCheckpoint out;
    out.meta.config_hash = j.at("config_hash").get<std::string>();
    out.meta.seed = j.at("seed").get<std::uint64_t>();
    out.meta.step = j.at("step").get<Index>();
    out.meta.model = model_config_parse(j.at("model"));
    for (const auto& name_j : j.at("param_order")) {
      const std::string name = name_j.get<std::string>();
      const json& p = j.at("params").at(name);
      out.store.create(name, p.at("shape").get<Shape>(),
                       values_from_json(p, name));
      if (p.contains("grad_multiplier"))
        out.store.set_grad_multiplier(name, p["grad_multiplier"].get<double>());
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint '" + path + "' schema violation: " + e.what());
  }
}

CheckpointMeta restore_checkpoint_values(const std::string& path,
                                         ParamStore& store) {
  json j = read_json_file(path);
  try {
    const json& params = j.at("params");
    if (params.size() != store.size())
      throw ConfigError("checkpoint '" + path + "' holds " +
                        std::to_string(params.size()) + " parameters, model has " +
                        std::to_string(store.size()));
    for (const auto& name : store.names()) {
      if (!params.contains(name))
        throw ConfigError("checkpoint '" + path + "' is missing parameter '" +
                          name + "'");
      Tensor t = store.get(name);
      Vec v = values_from_json(params.at(name), name);
      if (params.at(name).at("shape").get<Shape>() != t.shape())
        throw ConfigError("checkpoint parameter '" + name + "' has shape " +
                          shape_str(params.at(name).at("shape").get<Shape>()) +
                          ", model expects " + shape_str(t.shape()));
      t.values_mut() = v;
    }
    CheckpointMeta meta;
    meta.config_hash = j.at("config_hash").get<std::string>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.step = j.at("step").get<Index>();
    meta.model = model_config_parse(j.at("model"));
    return meta;
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint '" + path + "' schema violation: " + e.what());
  }
}

std::string model_config_to_json(const ModelConfig& cfg) {
  return model_config_json(cfg).dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  try {
    return model_config_parse(json::parse(json_text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config parse error: ") + e.what());
  }
}

} // namespace dr2n
