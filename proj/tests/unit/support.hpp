#pragma once

// Small hand-rolled generators shared by the unit tests.

#include <cstdint>
#include <vector>

#include "mfgmesh/env.hpp"
#include "mfgmesh/rng.hpp"

namespace testsupport {

using mfgmesh::Cell;
using mfgmesh::Rng;

inline int rand_int(Rng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(mfgmesh::uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
}

inline double rand_double(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * mfgmesh::uniform01(rng);
}

inline Cell rand_cell(Rng& rng, int width, int height) {
  return {rand_int(rng, 0, height - 1), rand_int(rng, 0, width - 1)};
}

inline std::vector<Cell> rand_cells(Rng& rng, std::size_t n, int width, int height) {
  std::vector<Cell> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rand_cell(rng, width, height));
  return out;
}

inline mfgmesh::GridConfig grid(int width, int height, int n,
                                mfgmesh::TaskKind task = mfgmesh::TaskKind::Cluster) {
  mfgmesh::GridConfig g;
  g.width = width;
  g.height = height;
  g.n_agents = n;
  g.task = task;
  if (task == mfgmesh::TaskKind::TargetAgreement) g.targets = mfgmesh::corner_targets(width, height);
  return g;
}

inline mfgmesh::EnvState env_at(const std::vector<Cell>& cells) {
  mfgmesh::EnvState env;
  for (const auto& c : cells) env.agents.push_back({c});
  return env;
}

}  // namespace testsupport
