#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mfgmesh/env.hpp"

namespace mfgmesh {

/// Undirected graph over agents. Adjacency lists are kept sorted and
/// symmetric; self-loops are never stored.
class AgentGraph {
 public:
  AgentGraph() = default;
  explicit AgentGraph(std::size_t n) : adj_(n) {}

  static AgentGraph complete(std::size_t n);
  static AgentGraph from_edges(std::size_t n,
                               std::span<const std::pair<std::size_t, std::size_t>> edges);

  std::size_t size() const { return adj_.size(); }
  void add_edge(std::size_t i, std::size_t j);
  bool has_edge(std::size_t i, std::size_t j) const;
  std::size_t edge_count() const;
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;  // i < j

  // Sorted neighbor list excluding i; throws std::out_of_range.
  const std::vector<std::size_t>& neighbors(std::size_t i) const;

 private:
  std::vector<std::vector<std::size_t>> adj_;
};

/// Undirected visibility graph over grid states; every state sees itself.
class StateVisGraph {
 public:
  StateVisGraph() = default;
  explicit StateVisGraph(std::size_t n_states);

  std::size_t num_states() const { return visible_.size(); }
  void add_edge(std::size_t a, std::size_t b);
  bool visible(std::size_t a, std::size_t b) const;
  // Sorted list of states visible from s, including s.
  const std::vector<std::size_t>& visible_from(std::size_t s) const { return visible_.at(s); }

 private:
  std::vector<std::vector<std::size_t>> visible_;
};

/// Radius in cells for a fraction of the grid diagonal.
double radius_threshold(double radius_fraction, const GridConfig& grid);

AgentGraph build_radius_agent_graph(std::span<const Cell> positions, double radius_fraction,
                                    const GridConfig& grid);

StateVisGraph build_visibility_graph(const GridConfig& grid, double radius_fraction);

/// Longest shortest path; nullopt when the graph is disconnected.
std::optional<std::size_t> diameter(const AgentGraph& g);

inline const std::vector<std::size_t>& neighbors(const AgentGraph& g, std::size_t i) {
  return g.neighbors(i);
}

}  // namespace mfgmesh
