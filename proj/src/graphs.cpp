#include "mfgmesh/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace mfgmesh {

namespace {

void insert_sorted(std::vector<std::size_t>& v, std::size_t x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

double cell_distance(Cell a, Cell b) {
  return std::hypot(static_cast<double>(a.row - b.row), static_cast<double>(a.col - b.col));
}

// Slack so that thresholds derived from fractions of the diagonal still
// include cells lying exactly on the circle.
constexpr double kDistanceSlack = 1e-9;

}  // namespace

AgentGraph AgentGraph::complete(std::size_t n) {
  AgentGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) g.adj_[i].push_back(j);
  return g;
}

AgentGraph AgentGraph::from_edges(std::size_t n,
                                  std::span<const std::pair<std::size_t, std::size_t>> edges) {
  AgentGraph g(n);
  for (auto [i, j] : edges) g.add_edge(i, j);
  return g;
}

void AgentGraph::add_edge(std::size_t i, std::size_t j) {
  if (i >= adj_.size() || j >= adj_.size()) throw std::out_of_range("agent index out of range");
  if (i == j) return;
  insert_sorted(adj_[i], j);
  insert_sorted(adj_[j], i);
}

bool AgentGraph::has_edge(std::size_t i, std::size_t j) const {
  const auto& n = adj_.at(i);
  return std::binary_search(n.begin(), n.end(), j);
}

std::size_t AgentGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& n : adj_) total += n.size();
  return total / 2;
}

std::vector<std::pair<std::size_t, std::size_t>> AgentGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < adj_.size(); ++i)
    for (std::size_t j : adj_[i])
      if (i < j) out.emplace_back(i, j);
  return out;
}

const std::vector<std::size_t>& AgentGraph::neighbors(std::size_t i) const {
  if (i >= adj_.size()) throw std::out_of_range("agent index out of range");
  return adj_[i];
}

StateVisGraph::StateVisGraph(std::size_t n_states) : visible_(n_states) {
  for (std::size_t s = 0; s < n_states; ++s) visible_[s].push_back(s);
}

void StateVisGraph::add_edge(std::size_t a, std::size_t b) {
  if (a >= visible_.size() || b >= visible_.size())
    throw std::out_of_range("state index out of range");
  insert_sorted(visible_[a], b);
  insert_sorted(visible_[b], a);
}

bool StateVisGraph::visible(std::size_t a, std::size_t b) const {
  const auto& v = visible_.at(a);
  return std::binary_search(v.begin(), v.end(), b);
}

double radius_threshold(double radius_fraction, const GridConfig& grid) {
  const double dw = grid.width - 1;
  const double dh = grid.height - 1;
  return radius_fraction * std::sqrt(dw * dw + dh * dh);
}

AgentGraph build_radius_agent_graph(std::span<const Cell> positions, double radius_fraction,
                                    const GridConfig& grid) {
  const double threshold = radius_threshold(radius_fraction, grid) + kDistanceSlack;
  const std::size_t n = positions.size();
  AgentGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (cell_distance(positions[i], positions[j]) <= threshold) g.add_edge(i, j);
  return g;
}

StateVisGraph build_visibility_graph(const GridConfig& grid, double radius_fraction) {
  const double threshold = radius_threshold(radius_fraction, grid) + kDistanceSlack;
  const std::size_t n = grid.num_states();
  StateVisGraph g(n);
  const int reach = static_cast<int>(std::floor(threshold));
  for (std::size_t a = 0; a < n; ++a) {
    const Cell ca = grid.cell(a);
    for (int dr = -reach; dr <= reach; ++dr)
      for (int dc = -reach; dc <= reach; ++dc) {
        const Cell cb{ca.row + dr, ca.col + dc};
        if (!grid.contains(cb)) continue;
        const std::size_t b = grid.index(cb);
        if (b > a && cell_distance(ca, cb) <= threshold) g.add_edge(a, b);
      }
  }
  return g;
}

std::optional<std::size_t> diameter(const AgentGraph& g) {
  const std::size_t n = g.size();
  std::size_t best = 0;
  std::vector<std::size_t> dist(n);
  constexpr std::size_t kUnseen = static_cast<std::size_t>(-1);
  for (std::size_t src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), kUnseen);
    dist[src] = 0;
    std::deque<std::size_t> queue{src};
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v : g.neighbors(u))
        if (dist[v] == kUnseen) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
    }
    for (std::size_t d : dist) {
      if (d == kUnseen) return std::nullopt;
      best = std::max(best, d);
    }
  }
  return best;
}

}  // namespace mfgmesh
