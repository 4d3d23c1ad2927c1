#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfgmesh/rng.hpp"

namespace mfgmesh {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

enum class TaskKind { Cluster, TargetAgreement, EvadeShark, PushObject, Disperse };

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };
inline constexpr std::size_t kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay};

enum class ObservationMode { LocalOnly, GlobalMeanField, EstimatedMeanField };

std::string_view to_string(TaskKind task);
std::string_view to_string(Action action);
std::string_view to_string(ObservationMode mode);
std::optional<TaskKind> parse_task(std::string_view name);
std::optional<ObservationMode> parse_observation_mode(std::string_view name);

inline bool has_entity(TaskKind task) {
  return task == TaskKind::EvadeShark || task == TaskKind::PushObject;
}
inline bool is_population_dependent(ObservationMode mode) {
  return mode != ObservationMode::LocalOnly;
}

struct GridConfig {
  int width = 10;
  int height = 10;
  TaskKind task = TaskKind::Cluster;
  int n_agents = 2;
  std::vector<Cell> targets;  // TargetAgreement only
  double shark_noise_prob = 0.01;

  std::size_t num_states() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(Cell c) const {
    return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width;
  }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.col);
  }
  Cell cell(std::size_t s) const {
    return {static_cast<int>(s / static_cast<std::size_t>(width)),
            static_cast<int>(s % static_cast<std::size_t>(width))};
  }
  // Sum of the largest horizontal and vertical distances on the grid.
  int max_manhattan() const { return (width - 1) + (height - 1); }

  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
};

// One target in each corner, the layout used for the agreement task.
std::vector<Cell> corner_targets(int width, int height);

struct AgentState {
  Cell pos;
};

struct EnvState {
  std::vector<AgentState> agents;
  std::optional<Cell> entity;  // shark or object
  long long time = 0;

  std::vector<Cell> positions() const;
};

/// Categorical distribution over the |S| grid cells (row-major).
struct EmpiricalDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t s) const { return probs[s]; }
  double sum() const;
};

Cell step_agent(Cell pos, Action action, const GridConfig& grid);

EmpiricalDistribution empirical_distribution(std::span<const AgentState> agents,
                                             const GridConfig& grid);
EmpiricalDistribution empirical_distribution(std::span<const Cell> positions,
                                             const GridConfig& grid);

/// Raw (unnormalized) task reward for agent i; exposed for tests and the
/// bounds used by normalization.
double raw_reward(TaskKind task, std::size_t i, const EnvState& env, Action action,
                  const EmpiricalDistribution& mu, const GridConfig& grid);

struct RewardBounds {
  double min;
  double max;
};
RewardBounds raw_reward_bounds(TaskKind task, const GridConfig& grid);

/// Task reward mapped affinely onto [0,1] with analytic per-task bounds.
double compute_reward(TaskKind task, std::size_t i, const EnvState& env, Action action,
                      const EmpiricalDistribution& mu, const GridConfig& grid);

/// Direction weights of the object's probability field, ordered as
/// {Up, Down, Left, Right}. Each direction gets 1 + the number of agents in
/// the cell adjacent to the object on the opposite side.
std::array<double, 4> push_field_weights(Cell object, std::span<const Cell> positions,
                                         const GridConfig& grid);

/// Cell the shark steps toward: the most populated cell, lowest index on ties.
std::size_t most_populated_state(const EmpiricalDistribution& mu);

/// Deterministic shark step toward `goal` (horizontal when dist_h >= dist_v).
Cell shark_step(Cell shark, Cell goal, const GridConfig& grid);

Cell advance_entity(TaskKind task, const EnvState& env, const EmpiricalDistribution& mu,
                    const GridConfig& grid, Rng& rng);

std::size_t observation_size(const GridConfig& grid, ObservationMode mode);

std::vector<double> encode_observation(const AgentState& agent, const EnvState& env,
                                       const EmpiricalDistribution* mf,
                                       const GridConfig& grid, ObservationMode mode);

}  // namespace mfgmesh
