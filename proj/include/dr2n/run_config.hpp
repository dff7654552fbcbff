#pragma once

#include <map>
#include <string>

#include "dr2n/ablation.hpp"
#include "dr2n/model.hpp"
#include "dr2n/synthworld.hpp"
#include "dr2n/trainer.hpp"

namespace dr2n {

/// Union of world, model, schedule, and run settings, loadable from a flat
/// key-value file (`key = value`, `#` comments). The model's structural
/// dimensions (classes, horizon, hidden width, history) are sourced from
/// the world keys so the two cannot drift apart. Every output artifact
/// embeds hash() so provenance is checkable.
struct RunConfig {
  WorldConfig world;
  ModelConfig model;
  Schedule schedule;
  std::uint64_t seed = 1;
  Index steps = 0;       // 0: full schedule
  Index batch_size = 4;
  Index count = 1000;    // generation
  Index num_seeds = 5;   // ablation
  Index train_episodes = 384;
  Index eval_episodes = 160;
  Index threads = 0;

  RunConfig();

  static RunConfig from_file(const std::string& path);
  void apply_pairs(const std::map<std::string, std::string>& kv);
  /// Re-derive the model's world-tied dimensions; call after field edits.
  void sync();
  void validate() const;

  /// Sorted key=value dump of every effective field.
  std::string canonical() const;
  /// 16-hex-digit FNV-1a of canonical().
  std::string hash() const;
};

std::map<std::string, std::string> parse_flat_kv(const std::string& text);

} // namespace dr2n
