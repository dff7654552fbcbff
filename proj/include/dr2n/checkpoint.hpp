#pragma once

#include <cstdint>
#include <string>

#include "dr2n/model.hpp"
#include "dr2n/param_store.hpp"

namespace dr2n {

/// Checkpoint metadata. Every artifact carries the config hash and seed of
/// the run that produced it.
struct CheckpointMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
  Index step = 0;
  ModelConfig model;
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  ParamStore store;
};

/// JSON map name -> (shape, float64 values). Doubles are emitted in
/// shortest-round-trip form, so save/load is bit-exact.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const CheckpointMeta& meta);
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Overwrite values of an existing store's parameters in place (training
/// resume: tensor identities survive). Names and shapes must match exactly.
CheckpointMeta restore_checkpoint_values(const std::string& path,
                                         ParamStore& store);

// ModelConfig <-> JSON string fragments shared with run configs.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

} // namespace dr2n
