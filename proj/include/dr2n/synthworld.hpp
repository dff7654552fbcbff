#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dr2n/box.hpp"
#include "dr2n/rng.hpp"
#include "dr2n/tensor.hpp"

namespace dr2n {

enum class WorldMode { MultiActor, SingleActorClip };
WorldMode parse_world_mode(const std::string& s);
std::string to_string(WorldMode m);

/// Seeded generator of multi-agent interaction episodes. Agents carry a
/// latent action class evolved by a solo Markov chain; when a trigger-class
/// agent sits within the interaction radius, the pairwise table takes over
/// and the agent responds to its nearest trigger instead. Distractor nodes
/// mimic false-positive proposals.
struct WorldConfig {
  Index num_classes = 8;  // A
  Index horizon = 5;      // T: labels exist for t = 0..T
  Index feature_dim = 64;

  Index n_true_min = 3, n_true_max = 6;
  Index n_fake_min = 6, n_fake_max = 12;
  double distractor_rate = 1.0;  // keep probability per sampled distractor

  double interaction_radius = 0.8;
  double interact_prob = 1.0;
  RowMat solo_table;  // A x A probability rows
  RowMat pair_table;  // A x A: partner class -> next
  std::vector<int> trigger_classes = {0, 1};  // partner classes firing pair_table

  double feature_noise = 0.15;
  double distractor_noise = 0.4;

  double box_min = 0.06, box_max = 0.18;
  double proposal_jitter = 0.15;  // relative center shift / size rescale

  WorldMode mode = WorldMode::MultiActor;
  // Early-classification mode: one actor, per-step features whose class
  // evidence sharpens over the clip, plus class-correlated context clutter.
  Index clip_length = 6;
  Index clip_context_min = 2, clip_context_max = 4;
  double clip_ambiguity = 0.55;  // class weight at the first step
  double context_noise = 0.4;

  std::uint64_t embed_seed = 0x5eedf00dull;

  void validate() const;
  static WorldConfig defaults();       // the high-distractor multi-actor world
  static WorldConfig clip_defaults();  // the early-classification world
};

struct EpisodeNode {
  Box proposal;
  RowMat features;  // L x d; L == 1 outside clip mode
  bool distractor = false;
};

struct EpisodeActor {
  Box gt_box;
  std::vector<int> labels;  // t = 0..T
};

/// One synthetic sample. The k-th non-distractor node corresponds to
/// actors[k].
struct Episode {
  std::uint64_t seed = 0;
  std::vector<EpisodeNode> nodes;
  std::vector<EpisodeActor> actors;
  std::optional<int> clip_label;

  Index num_nodes() const { return static_cast<Index>(nodes.size()); }
  Index num_actors() const { return static_cast<Index>(actors.size()); }
  /// Actor index of node n, or -1 for distractors.
  int node_actor(Index n) const;
  /// N x d feature matrix at feature step s (s = 0 outside clip mode).
  RowMat feature_matrix(Index step) const;
  Index feature_steps() const;
  std::vector<Box> proposal_boxes() const;
};

/// Class embeddings (A x d) and related fixed projections are derived from
/// embed_seed only, so every episode of a config shares them.
RowMat class_embeddings(const WorldConfig& cfg);
RowMat context_embeddings(const WorldConfig& cfg);
RowMat position_projection(const WorldConfig& cfg);  // d x 4

/// Stationary distribution of a probability-row table, by power iteration.
Vec stationary_distribution(const RowMat& table);

Episode generate(const WorldConfig& cfg, std::uint64_t seed);

std::string serialize(const Episode& ep, const std::string& config_hash = "");
Episode deserialize(const std::string& line, int line_number = -1);

void write_jsonl(const std::string& path, const WorldConfig& cfg,
                 Index count, std::uint64_t base_seed,
                 const std::string& config_hash = "");
std::vector<Episode> read_jsonl(const std::string& path);

} // namespace dr2n
