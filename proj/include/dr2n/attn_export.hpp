#pragma once

#include <string>
#include <vector>

#include "dr2n/model.hpp"

namespace dr2n {

/// One exported attention edge: at rollout step `step` (the update that
/// produced h^step), node i aggregated from neighbor j with weight alpha_ij.
struct AttnRecord {
  Index step = 0;
  Index node = 0;
  Index neighbor = 0;
  double weight = 0.0;
};

/// Top-k (neighbor, weight) pairs per rollout step for one node, from a
/// prediction captured with attention. Ties break on the lower neighbor
/// index; rows with fewer than k admissible neighbors emit what exists.
std::vector<AttnRecord> top_k_attention(const Prediction& pred, Index node,
                                        Index k);

void write_attention_json(const std::string& path,
                          const std::vector<AttnRecord>& records,
                          const std::string& config_hash, Index episode_index,
                          Index node, Index k);

/// DOT digraph with one edge per record, neighbor -> node, labelled with the
/// step and weight.
void write_attention_dot(const std::string& path,
                         const std::vector<AttnRecord>& records,
                         Index num_nodes);

} // namespace dr2n
