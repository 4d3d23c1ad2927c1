#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfgmesh/config.hpp"
#include "mfgmesh/env.hpp"
#include "mfgmesh/graphs.hpp"
#include "mfgmesh/metrics.hpp"
#include "mfgmesh/mfest.hpp"
#include "mfgmesh/nn.hpp"
#include "mfgmesh/rng.hpp"

namespace mfgmesh {

/// Fixed-capacity transition store, emptied at the start of every iteration.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  void clear() { items_.clear(); }
  // Drops the oldest record once full.
  void push(Transition tr);
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  std::span<const Transition> items() const { return items_; }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
};

struct AgentLearner {
  MlpParams params;
  MlpParams target;
  AdamState adam;
  ReplayBuffer buffer;
  double sigma = 0.0;
  Rng action_rng;
  Rng batch_rng;
  Rng adoption_rng;

  ActionProbs policy(std::span<const double> obs, double tau_q) const {
    return policy_from_q(forward(params, obs), tau_q);
  }
};

/// Replacement reward used by tests to build controlled environments.
using RewardOverride = std::function<double(std::size_t agent, const EnvState& env,
                                            Action action, const EmpiricalDistribution& mu)>;

/// Live simulation: the environment, every agent's learner and the entity RNG
/// stream. Copying a Population yields an independent snapshot.
struct Population {
  ExperimentConfig config;
  GridConfig grid;
  EnvState env;
  std::vector<AgentLearner> agents;
  Rng entity_rng;
  StateVisGraph visibility;
  RewardOverride reward_override;

  // Observations for env.time; reset obs_cache_time to -1 after editing env.
  std::vector<std::vector<double>> obs_cache;
  long long obs_cache_time = -1;

  std::size_t size() const { return agents.size(); }
  std::size_t observation_length() const { return observation_size(grid, config.obs_mode); }
};

/// Builds a population for one trial: uniform random initial cells, random
/// entity placement and per-agent network initialisation.
Population make_population(const ExperimentConfig& config, std::uint64_t trial_seed);

/// Communication graph at the current time step (empty for independent learners).
AgentGraph communication_graph(const Population& pop);

/// Observations of every agent at the current time step.
std::vector<std::vector<double>> build_observations(const Population& pop);

struct StepRecord {
  std::vector<std::vector<double>> obs;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<std::vector<double>> next_obs;
};

/// One synchronous system step: sample actions, reward from the pre-step
/// distribution, advance the entity, then the agents.
StepRecord system_step(Population& pop);

/// M steps; every agent stores its transitions. Returns per-agent rewards.
std::vector<std::vector<double>> collect_phase(Population& pop, int m_steps);

struct TrainOptions {
  int l_steps = 50;
  int batch_size = 32;
  int nu = 49;
  double tau_q = 0.03;
  double cl = -1.0;
  double gamma = 0.9;
};

TrainOptions train_options(const ExperimentConfig& config);

/// L minibatch updates. The target network is synced before the first update
/// and again after update l whenever l > 0 and l mod nu == 0. Returns the
/// per-update losses.
std::vector<double> train_phase(AgentLearner& learner, const TrainOptions& options);

/// Runs E live steps; sets and returns sigma_i = sum_e gamma^e r_i.
std::vector<double> evaluate_sigma(Population& pop, int e_steps, double gamma);

/// One synchronous adoption round over `comm`. Each agent samples j from
/// {i} u neighbours with probability softmax(sigma / tau_comm) and copies
/// (sigma_j, params_j) as they were at the start of the round. Returns the
/// adopted index per agent.
std::vector<std::size_t> adoption_round(std::vector<AgentLearner>& learners,
                                        const AgentGraph& comm, double tau_comm);

/// One outer iteration: collect, train, refresh, evaluate sigma, then the
/// architecture-specific exchange.
MetricsRow run_iteration(Population& pop, int k);

struct TrainingResult {
  Population population;
  std::vector<MetricsRow> rows;
};

/// Runs K iterations for one trial seed, appending exploitability on its
/// cadence. `on_iteration` is invoked after every row (may be empty).
TrainingResult run_training(const ExperimentConfig& config, std::uint64_t trial_seed,
                            const std::function<void(const Population&, const MetricsRow&)>&
                                on_iteration = {});

/// Per-agent checkpoint: u64 little-endian iteration index followed by the
/// parameter stream of serialize_params.
void write_checkpoint(const std::string& path, const MlpParams& params, std::uint64_t iteration);
std::pair<MlpParams, std::uint64_t> read_checkpoint(const std::string& path);

}  // namespace mfgmesh
