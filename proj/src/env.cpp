#include "mfgmesh/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace mfgmesh {

namespace {

int dist_h(Cell a, Cell b) { return std::abs(a.col - b.col); }
int dist_v(Cell a, Cell b) { return std::abs(a.row - b.row); }

// Distance from `c` to the nearest grid edge.
int edge_distance(Cell c, const GridConfig& grid) {
  return std::min({c.col, grid.width - 1 - c.col, c.row, grid.height - 1 - c.row});
}

// Occupancy fraction of the agent's own cell, floored at 1/N so that an
// estimated distribution never yields log(0).
double own_fraction(std::size_t i, const EnvState& env, const EmpiricalDistribution& mu,
                    const GridConfig& grid) {
  const double floor = 1.0 / static_cast<double>(grid.n_agents);
  return std::max(mu[grid.index(env.agents.at(i).pos)], floor);
}

}  // namespace

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Cluster: return "cluster";
    case TaskKind::TargetAgreement: return "target_agreement";
    case TaskKind::EvadeShark: return "evade_shark";
    case TaskKind::PushObject: return "push_object";
    case TaskKind::Disperse: return "disperse";
  }
  return "?";
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::Stay: return "stay";
  }
  return "?";
}

std::string_view to_string(ObservationMode mode) {
  switch (mode) {
    case ObservationMode::LocalOnly: return "local";
    case ObservationMode::GlobalMeanField: return "global";
    case ObservationMode::EstimatedMeanField: return "estimated";
  }
  return "?";
}

std::optional<TaskKind> parse_task(std::string_view name) {
  for (auto t : {TaskKind::Cluster, TaskKind::TargetAgreement, TaskKind::EvadeShark,
                 TaskKind::PushObject, TaskKind::Disperse})
    if (to_string(t) == name) return t;
  return std::nullopt;
}

std::optional<ObservationMode> parse_observation_mode(std::string_view name) {
  for (auto m : {ObservationMode::LocalOnly, ObservationMode::GlobalMeanField,
                 ObservationMode::EstimatedMeanField})
    if (to_string(m) == name) return m;
  return std::nullopt;
}

void GridConfig::validate() const {
  if (width < 2) throw std::invalid_argument("width must be >= 2");
  if (height < 2) throw std::invalid_argument("height must be >= 2");
  if (n_agents < 2) throw std::invalid_argument("n_agents must be >= 2");
  if (task == TaskKind::TargetAgreement && targets.empty())
    throw std::invalid_argument("targets must be nonempty for target_agreement");
  for (const Cell& t : targets)
    if (!contains(t)) throw std::invalid_argument("target outside the grid");
  if (!(shark_noise_prob >= 0.0 && shark_noise_prob <= 1.0))
    throw std::invalid_argument("shark_noise_prob must lie in [0,1]");
}

std::vector<Cell> corner_targets(int width, int height) {
  return {{0, 0}, {0, width - 1}, {height - 1, 0}, {height - 1, width - 1}};
}

std::vector<Cell> EnvState::positions() const {
  std::vector<Cell> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(a.pos);
  return out;
}

double EmpiricalDistribution::sum() const {
  return std::accumulate(probs.begin(), probs.end(), 0.0);
}

Cell step_agent(Cell pos, Action action, const GridConfig& grid) {
  Cell next = pos;
  switch (action) {
    case Action::Up: --next.row; break;
    case Action::Down: ++next.row; break;
    case Action::Left: --next.col; break;
    case Action::Right: ++next.col; break;
    case Action::Stay: break;
  }
  return grid.contains(next) ? next : pos;
}

EmpiricalDistribution empirical_distribution(std::span<const Cell> positions,
                                             const GridConfig& grid) {
  std::vector<std::size_t> counts(grid.num_states(), 0);
  for (const Cell& c : positions) ++counts[grid.index(c)];
  EmpiricalDistribution mu;
  mu.probs.resize(counts.size());
  const double n = static_cast<double>(positions.size());
  for (std::size_t s = 0; s < counts.size(); ++s)
    mu.probs[s] = static_cast<double>(counts[s]) / n;
  return mu;
}

EmpiricalDistribution empirical_distribution(std::span<const AgentState> agents,
                                             const GridConfig& grid) {
  std::vector<Cell> positions;
  positions.reserve(agents.size());
  for (const auto& a : agents) positions.push_back(a.pos);
  return empirical_distribution(positions, grid);
}

double raw_reward(TaskKind task, std::size_t i, const EnvState& env, Action action,
                  const EmpiricalDistribution& mu, const GridConfig& grid) {
  const Cell pos = env.agents.at(i).pos;
  const double inv_n = 1.0 / static_cast<double>(grid.n_agents);
  switch (task) {
    case TaskKind::Cluster:
      return std::log(own_fraction(i, env, mu, grid));

    case TaskKind::TargetAgreement: {
      if (grid.targets.empty())
        throw std::invalid_argument("target_agreement reward requires targets");
      const double frac = mu[grid.index(pos)];
      const double collab = frac > inv_n + 1e-12 ? frac : -1.0;
      const bool on_target =
          std::find(grid.targets.begin(), grid.targets.end(), pos) != grid.targets.end();
      return on_target ? collab : -1.0;
    }

    case TaskKind::EvadeShark: {
      const Cell shark = env.entity.value();
      const double span = grid.max_manhattan();
      const double log_floor = std::log(inv_n);
      // log-occupancy rescaled onto [0, max_manhattan]
      const double cluster =
          span * (std::log(own_fraction(i, env, mu, grid)) - log_floor) / (-log_floor);
      return dist_h(shark, pos) + dist_v(shark, pos) + cluster;
    }

    case TaskKind::PushObject: {
      const Cell object = env.entity.value();
      return -static_cast<double>(dist_h(object, pos) + dist_v(object, pos)) -
             static_cast<double>(edge_distance(object, grid));
    }

    case TaskKind::Disperse:
      return action == Action::Stay ? -mu[grid.index(pos)] : -1.0;
  }
  return 0.0;
}

RewardBounds raw_reward_bounds(TaskKind task, const GridConfig& grid) {
  const double span = grid.max_manhattan();
  switch (task) {
    case TaskKind::Cluster:
      return {std::log(1.0 / static_cast<double>(grid.n_agents)), 0.0};
    case TaskKind::TargetAgreement: return {-1.0, 1.0};
    case TaskKind::EvadeShark: return {0.0, 2.0 * span};
    case TaskKind::PushObject: return {-2.0 * span, 0.0};
    case TaskKind::Disperse: return {-1.0, 0.0};
  }
  return {0.0, 1.0};
}

double compute_reward(TaskKind task, std::size_t i, const EnvState& env, Action action,
                      const EmpiricalDistribution& mu, const GridConfig& grid) {
  const double raw = raw_reward(task, i, env, action, mu, grid);
  const auto [lo, hi] = raw_reward_bounds(task, grid);
  return std::clamp((raw - lo) / (hi - lo), 0.0, 1.0);
}

std::array<double, 4> push_field_weights(Cell object, std::span<const Cell> positions,
                                         const GridConfig& grid) {
  auto count_at = [&](Cell c) {
    if (!grid.contains(c)) return 0.0;
    return static_cast<double>(std::count(positions.begin(), positions.end(), c));
  };
  const Cell above{object.row - 1, object.col};
  const Cell below{object.row + 1, object.col};
  const Cell left{object.row, object.col - 1};
  const Cell right{object.row, object.col + 1};
  // agents on one side push the object toward the other
  return {1.0 + count_at(below), 1.0 + count_at(above), 1.0 + count_at(right),
          1.0 + count_at(left)};
}

std::size_t most_populated_state(const EmpiricalDistribution& mu) {
  return static_cast<std::size_t>(
      std::distance(mu.probs.begin(), std::max_element(mu.probs.begin(), mu.probs.end())));
}

Cell shark_step(Cell shark, Cell goal, const GridConfig& grid) {
  Cell next = shark;
  if (dist_h(shark, goal) >= dist_v(shark, goal)) {
    next.col += (goal.col > shark.col) - (goal.col < shark.col);
  } else {
    next.row += (goal.row > shark.row) - (goal.row < shark.row);
  }
  return grid.contains(next) ? next : shark;
}

Cell advance_entity(TaskKind task, const EnvState& env, const EmpiricalDistribution& mu,
                    const GridConfig& grid, Rng& rng) {
  if (!has_entity(task) || !env.entity)
    throw std::invalid_argument("advance_entity called for a task without an entity");
  const Cell current = *env.entity;

  if (task == TaskKind::EvadeShark) {
    const Cell goal = grid.cell(most_populated_state(mu));
    const double u = uniform01(rng);
    if (u < grid.shark_noise_prob) {
      const auto dir = static_cast<Action>(uniform_index(rng, 4));
      return step_agent(current, dir, grid);
    }
    return shark_step(current, goal, grid);
  }

  const auto positions = env.positions();
  const auto weights = push_field_weights(current, positions, grid);
  const auto dir = static_cast<Action>(sample_weighted(rng, weights));
  return step_agent(current, dir, grid);
}

std::size_t observation_size(const GridConfig& grid, ObservationMode mode) {
  std::size_t n = static_cast<std::size_t>(grid.width + grid.height);
  if (has_entity(grid.task)) n *= 2;
  if (is_population_dependent(mode)) n += grid.num_states();
  return n;
}

std::vector<double> encode_observation(const AgentState& agent, const EnvState& env,
                                       const EmpiricalDistribution* mf,
                                       const GridConfig& grid, ObservationMode mode) {
  const bool wants_mf = is_population_dependent(mode);
  if (wants_mf != (mf != nullptr))
    throw std::invalid_argument("mean field must be given iff the mode is population-dependent");
  if (mf && mf->size() != grid.num_states())
    throw std::invalid_argument("mean-field length does not match the grid");

  std::vector<double> obs(observation_size(grid, mode), 0.0);
  std::size_t offset = 0;
  auto put_cell = [&](Cell c) {
    obs[offset + static_cast<std::size_t>(c.row)] = 1.0;
    offset += static_cast<std::size_t>(grid.height);
    obs[offset + static_cast<std::size_t>(c.col)] = 1.0;
    offset += static_cast<std::size_t>(grid.width);
  };
  put_cell(agent.pos);
  if (has_entity(grid.task)) put_cell(env.entity.value());
  if (mf) std::copy(mf->probs.begin(), mf->probs.end(), obs.begin() + static_cast<long>(offset));
  return obs;
}

}  // namespace mfgmesh
