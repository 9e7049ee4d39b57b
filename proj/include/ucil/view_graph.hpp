#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ucil/records.hpp"

namespace ucil {

enum class View { hashtag, entity, user };

inline constexpr std::array<View, 3> kAllViews{View::hashtag, View::entity, View::user};

inline const char* view_name(View v) {
  switch (v) {
    case View::hashtag: return "co-hashtag";
    case View::entity: return "co-entity";
    case View::user: return "co-user";
  }
  return "?";
}

inline View view_from_name(const std::string& s) {
  for (View v : kAllViews)
    if (s == view_name(v)) return v;
  throw std::invalid_argument("unknown view name: " + s);
}

/// Undirected message graph for one view, CSR with sorted neighbor lists.
/// Every node carries a self-loop; adjacency is symmetric.
struct ViewGraph {
  View view = View::hashtag;
  std::size_t node_count = 0;
  std::vector<int> offsets;    // node_count + 1
  std::vector<int> neighbors;  // sorted per row, self included
  std::vector<double> timestamps;

  std::span<const int> neighbors_of(std::size_t i) const {
    return {neighbors.data() + offsets[i],
            static_cast<std::size_t>(offsets[i + 1] - offsets[i])};
  }

  bool has_edge(int i, int j) const {
    auto n = neighbors_of(static_cast<std::size_t>(i));
    return std::binary_search(n.begin(), n.end(), j);
  }

  std::size_t edge_count_undirected() const {
    // each non-self edge appears twice in CSR
    return (neighbors.size() - node_count) / 2;
  }
};

namespace detail {

inline const std::vector<std::string>& view_tokens(const MessageRecord& r, View v) {
  switch (v) {
    case View::hashtag: return r.hashtags;
    case View::entity: return r.entities;
    case View::user: return r.users;
  }
  throw std::logic_error("view_tokens: bad view");
}

inline ViewGraph csr_from_neighbor_sets(View view, std::vector<std::vector<int>> adj,
                                        std::vector<double> timestamps) {
  ViewGraph g;
  g.view = view;
  g.node_count = adj.size();
  g.timestamps = std::move(timestamps);
  g.offsets.resize(g.node_count + 1, 0);
  for (std::size_t i = 0; i < adj.size(); ++i) {
    auto& row = adj[i];
    row.push_back(static_cast<int>(i));  // self-loop
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.offsets[i + 1] = g.offsets[i] + static_cast<int>(row.size());
  }
  g.neighbors.reserve(static_cast<std::size_t>(g.offsets.back()));
  for (const auto& row : adj) g.neighbors.insert(g.neighbors.end(), row.begin(), row.end());
  return g;
}

}  // namespace detail

/// Connects every pair of messages sharing at least one token of the view's
/// attribute; multiplicity is ignored. Adds a self-loop to every node, so
/// messages with an empty attribute list stay reachable by aggregation.
inline ViewGraph build_view_graph(std::span<const MessageRecord> records, View view) {
  if (records.empty()) throw std::invalid_argument("build_view_graph: empty record list");
  const std::size_t n = records.size();

  std::unordered_map<std::string, std::vector<int>> token_nodes;
  for (std::size_t i = 0; i < n; ++i)
    for (const std::string& tok : detail::view_tokens(records[i], view)) {
      auto& nodes = token_nodes[tok];
      if (nodes.empty() || nodes.back() != static_cast<int>(i))
        nodes.push_back(static_cast<int>(i));
    }

  std::vector<std::vector<int>> adj(n);
  for (const auto& [tok, nodes] : token_nodes) {
    for (std::size_t a = 0; a < nodes.size(); ++a)
      for (std::size_t b = a + 1; b < nodes.size(); ++b) {
        adj[static_cast<std::size_t>(nodes[a])].push_back(nodes[b]);
        adj[static_cast<std::size_t>(nodes[b])].push_back(nodes[a]);
      }
  }

  std::vector<double> ts(n);
  for (std::size_t i = 0; i < n; ++i) ts[i] = records[i].timestamp;
  return detail::csr_from_neighbor_sets(view, std::move(adj), std::move(ts));
}

/// Fraction of non-self-loop undirected edges whose endpoints share a label.
/// A graph with no such edges has no defined ratio and yields nullopt.
inline std::optional<double> edge_quality(const ViewGraph& g, std::span<const int> labels) {
  if (labels.size() != g.node_count)
    throw std::invalid_argument("edge_quality: labels length must equal node count");
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < g.node_count; ++i)
    for (int j : g.neighbors_of(i)) {
      if (j <= static_cast<int>(i)) continue;  // count each undirected edge once, skip self
      ++total;
      if (labels[i] == labels[static_cast<std::size_t>(j)]) ++correct;
    }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace ucil
