#include "dr2n/attn_export.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>

#include "dr2n/errors.hpp"

namespace dr2n {

using nlohmann::json;

std::vector<AttnRecord> top_k_attention(const Prediction& pred, Index node,
                                        Index k) {
  if (pred.attention.empty())
    throw ConfigError("attention export: prediction carries no attention "
                      "(run a relational variant with capture enabled)");
  if (k < 1) throw ConfigError("attention export: k must be >= 1");
  std::vector<AttnRecord> out;
  for (size_t si = 0; si < pred.attention.size(); ++si) {
    const RowMat& alpha = pred.attention[si];
    if (node < 0 || node >= alpha.rows())
      throw ConfigError("attention export: node " + std::to_string(node) +
                        " out of range for " + std::to_string(alpha.rows()) +
                        " nodes");
    std::vector<std::pair<double, Index>> row;
    for (Index j = 0; j < alpha.cols(); ++j)
      if (alpha(node, j) > 0.0) row.push_back({alpha(node, j), j});
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const Index take = std::min<Index>(k, static_cast<Index>(row.size()));
    for (Index r = 0; r < take; ++r)
      out.push_back({static_cast<Index>(si) + 1, node, row[r].second,
                     row[r].first});
  }
  return out;
}

void write_attention_json(const std::string& path,
                          const std::vector<AttnRecord>& records,
                          const std::string& config_hash, Index episode_index,
                          Index node, Index k) {
  json j;
  j["config_hash"] = config_hash;
  j["episode"] = episode_index;
  j["node"] = node;
  j["top_k"] = k;
  json edges = json::array();
  for (const auto& r : records) {
    json e;
    e["step"] = r.step;
    e["i"] = r.node;
    e["j"] = r.neighbor;
    e["weight"] = r.weight;
    edges.push_back(std::move(e));
  }
  j["edges"] = std::move(edges);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

void write_attention_dot(const std::string& path,
                         const std::vector<AttnRecord>& records,
                         Index num_nodes) {
  std::set<Index> mentioned;
  for (const auto& r : records) {
    mentioned.insert(r.node);
    mentioned.insert(r.neighbor);
  }
  std::string body = "digraph attention {\n  rankdir=LR;\n";
  for (Index n = 0; n < num_nodes; ++n) {
    if (!mentioned.count(n)) continue;
    body += "  n" + std::to_string(n) + " [label=\"node " + std::to_string(n) +
            "\"];\n";
  }
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "t=%lld w=%.4f",
                  static_cast<long long>(r.step), r.weight);
    body += "  n" + std::to_string(r.neighbor) + " -> n" +
            std::to_string(r.node) + " [label=\"" + buf + "\"];\n";
  }
  body += "}\n";
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace dr2n
