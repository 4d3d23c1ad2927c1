#include "mfgmesh/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace mfgmesh {

void ReplayBuffer::push(Transition tr) {
  if (capacity_ == 0) return;
  if (items_.size() == capacity_) items_.erase(items_.begin());
  items_.push_back(std::move(tr));
}

Population make_population(const ExperimentConfig& config, std::uint64_t trial_seed) {
  config.validate(/*allow_zero_iterations=*/true);
  Population pop;
  pop.config = config;
  pop.grid = config.grid();
  pop.grid.validate();

  const auto n = static_cast<std::size_t>(config.n_agents);
  Rng init = make_stream(trial_seed, Stream::Init);
  pop.env.agents.resize(n);
  for (auto& a : pop.env.agents) {
    a.pos.row = static_cast<int>(uniform_index(init, static_cast<std::size_t>(pop.grid.height)));
    a.pos.col = static_cast<int>(uniform_index(init, static_cast<std::size_t>(pop.grid.width)));
  }
  if (has_entity(pop.grid.task)) {
    Cell c;
    c.row = static_cast<int>(uniform_index(init, static_cast<std::size_t>(pop.grid.height)));
    c.col = static_cast<int>(uniform_index(init, static_cast<std::size_t>(pop.grid.width)));
    pop.env.entity = c;
  }
  pop.entity_rng = make_stream(trial_seed, Stream::Entity);

  const std::size_t in = pop.observation_length();
  const std::size_t hidden = hidden_width_for(in, static_cast<std::size_t>(config.hidden_floor));
  pop.agents.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng weights = make_stream(trial_seed, Stream::Weights, i);
    AgentLearner learner{
        .params = MlpParams::random(in, hidden, weights),
        .target = {},
        .adam = {},
        .buffer = ReplayBuffer(static_cast<std::size_t>(config.M)),
        .sigma = 0.0,
        .action_rng = make_stream(trial_seed, Stream::Action, i),
        .batch_rng = make_stream(trial_seed, Stream::Batch, i),
        .adoption_rng = make_stream(trial_seed, Stream::Adoption, i),
    };
    learner.target = sync_target(learner.params);
    learner.adam = AdamState::for_params(learner.params, config.adam_lr);
    pop.agents.push_back(std::move(learner));
  }

  const bool estimating = config.obs_mode == ObservationMode::EstimatedMeanField &&
                          config.estimation == EstimationMode::Visibility;
  if (config.architecture == ArchitectureKind::Independent) {
    pop.visibility = StateVisGraph(pop.grid.num_states());
  } else if (estimating) {
    pop.visibility = build_visibility_graph(pop.grid, config.vis_radius_fraction);
  }
  return pop;
}

AgentGraph communication_graph(const Population& pop) {
  if (pop.config.architecture == ArchitectureKind::Independent) return AgentGraph(pop.size());
  const auto positions = pop.env.positions();
  return build_radius_agent_graph(positions, pop.config.comm_radius_fraction, pop.grid);
}

namespace {

std::vector<MeanFieldEstimate> estimated_mean_fields(const Population& pop) {
  const std::size_t n = pop.size();
  std::vector<std::size_t> states(n);
  for (std::size_t i = 0; i < n; ++i) states[i] = pop.grid.index(pop.env.agents[i].pos);
  const AgentGraph comm = communication_graph(pop);
  const auto rounds = static_cast<std::size_t>(pop.config.C_e);

  if (pop.config.estimation == EstimationMode::Visibility)
    return estimate_all(states, comm, pop.visibility, rounds);

  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  const AgentGraph obs =
      pop.config.architecture == ArchitectureKind::Independent
          ? AgentGraph(n)
          : build_radius_agent_graph(pop.env.positions(), pop.config.vis_radius_fraction,
                                     pop.grid);
  return estimate_all(states, ids, comm, obs, rounds, pop.grid.num_states());
}

}  // namespace

std::vector<std::vector<double>> build_observations(const Population& pop) {
  const auto mode = pop.config.obs_mode;
  const std::size_t n = pop.size();
  std::vector<std::vector<double>> out;
  out.reserve(n);

  if (!is_population_dependent(mode)) {
    for (const auto& a : pop.env.agents)
      out.push_back(encode_observation(a, pop.env, nullptr, pop.grid, mode));
    return out;
  }

  const bool use_true_mu = mode == ObservationMode::GlobalMeanField ||
                           pop.config.architecture == ArchitectureKind::Centralised;
  if (use_true_mu) {
    const auto mu = empirical_distribution(pop.env.agents, pop.grid);
    for (const auto& a : pop.env.agents)
      out.push_back(encode_observation(a, pop.env, &mu, pop.grid, mode));
    return out;
  }

  const auto estimates = estimated_mean_fields(pop);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(encode_observation(pop.env.agents[i], pop.env, &estimates[i], pop.grid, mode));
  return out;
}

StepRecord system_step(Population& pop) {
  StepRecord rec;
  if (pop.obs_cache_time != pop.env.time) {
    pop.obs_cache = build_observations(pop);
    pop.obs_cache_time = pop.env.time;
  }
  rec.obs = pop.obs_cache;

  const std::size_t n = pop.size();
  const auto mu = empirical_distribution(pop.env.agents, pop.grid);
  rec.actions.resize(n);
  rec.rewards.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& agent = pop.agents[i];
    const auto probs = agent.policy(rec.obs[i], pop.config.tau_q);
    rec.actions[i] = static_cast<Action>(sample_weighted(agent.action_rng, probs));
  }
  for (std::size_t i = 0; i < n; ++i) {
    rec.rewards[i] = pop.reward_override
                         ? pop.reward_override(i, pop.env, rec.actions[i], mu)
                         : compute_reward(pop.grid.task, i, pop.env, rec.actions[i], mu, pop.grid);
  }

  if (has_entity(pop.grid.task))
    pop.env.entity = advance_entity(pop.grid.task, pop.env, mu, pop.grid, pop.entity_rng);
  for (std::size_t i = 0; i < n; ++i)
    pop.env.agents[i].pos = step_agent(pop.env.agents[i].pos, rec.actions[i], pop.grid);
  ++pop.env.time;

  pop.obs_cache = build_observations(pop);
  pop.obs_cache_time = pop.env.time;
  rec.next_obs = pop.obs_cache;
  return rec;
}

std::vector<std::vector<double>> collect_phase(Population& pop, int m_steps) {
  std::vector<std::vector<double>> rewards(pop.size());
  for (int m = 0; m < m_steps; ++m) {
    StepRecord rec = system_step(pop);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      rewards[i].push_back(rec.rewards[i]);
      pop.agents[i].buffer.push(Transition{std::move(rec.obs[i]), rec.actions[i],
                                           rec.rewards[i], std::move(rec.next_obs[i])});
    }
  }
  return rewards;
}

TrainOptions train_options(const ExperimentConfig& config) {
  return {config.L, config.batch_size, config.resolved_nu(), config.tau_q, config.cl,
          config.gamma};
}

namespace {

// Munchausen targets of every buffered transition under the current target net.
std::vector<double> buffer_targets(const AgentLearner& learner, const Eigen::MatrixXd& obs,
                                   const Eigen::MatrixXd& next_obs, const TrainOptions& opt) {
  const Eigen::MatrixXd q_now = forward_batch(learner.target, obs);
  const Eigen::MatrixXd q_next = forward_batch(learner.target, next_obs);
  const auto items = learner.buffer.items();
  std::vector<double> targets(items.size());
  for (std::size_t b = 0; b < items.size(); ++b) {
    QValues now{}, next{};
    for (std::size_t a = 0; a < kNumActions; ++a) {
      now[a] = q_now(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      next[a] = q_next(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    targets[b] = munchausen_target_from_q(now, next, items[b].action, items[b].reward, opt.tau_q,
                                          opt.cl, opt.gamma);
  }
  return targets;
}

}  // namespace

std::vector<double> train_phase(AgentLearner& learner, const TrainOptions& opt) {
  if (learner.buffer.empty()) throw std::invalid_argument("train_phase needs a nonempty buffer");
  if (opt.nu < 1) throw std::invalid_argument("nu must be >= 1");
  const auto items = learner.buffer.items();
  const std::size_t n = items.size();
  const auto in = static_cast<Eigen::Index>(learner.params.input_size());

  Eigen::MatrixXd obs(in, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd next_obs(in, static_cast<Eigen::Index>(n));
  for (std::size_t b = 0; b < n; ++b) {
    if (items[b].obs.size() != static_cast<std::size_t>(in) ||
        items[b].next_obs.size() != static_cast<std::size_t>(in))
      throw std::invalid_argument("buffered observation length mismatch");
    obs.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Eigen::VectorXd>(items[b].obs.data(), in);
    next_obs.col(static_cast<Eigen::Index>(b)) =
        Eigen::Map<const Eigen::VectorXd>(items[b].next_obs.data(), in);
  }

  learner.target = sync_target(learner.params);
  std::vector<double> targets = buffer_targets(learner, obs, next_obs, opt);

  const auto batch = static_cast<std::size_t>(opt.batch_size);
  Eigen::MatrixXd inputs(in, static_cast<Eigen::Index>(batch));
  std::vector<Action> actions(batch);
  std::vector<double> batch_targets(batch);
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(std::max(opt.l_steps, 0)));

  for (int l = 0; l < opt.l_steps; ++l) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t pick = uniform_index(learner.batch_rng, n);
      inputs.col(static_cast<Eigen::Index>(b)) = obs.col(static_cast<Eigen::Index>(pick));
      actions[b] = items[pick].action;
      batch_targets[b] = targets[pick];
    }
    auto result = loss_and_gradients(learner.params, inputs, actions, batch_targets);
    losses.push_back(result.loss);
    adam_step(learner.params, result.grads, learner.adam);
    if (l > 0 && l % opt.nu == 0) {
      learner.target = sync_target(learner.params);
      targets = buffer_targets(learner, obs, next_obs, opt);
    }
  }
  return losses;
}

std::vector<double> evaluate_sigma(Population& pop, int e_steps, double gamma) {
  std::vector<double> sigma(pop.size(), 0.0);
  double discount = 1.0;
  for (int e = 0; e < e_steps; ++e) {
    const StepRecord rec = system_step(pop);
    for (std::size_t i = 0; i < pop.size(); ++i) sigma[i] += discount * rec.rewards[i];
    discount *= gamma;
  }
  for (std::size_t i = 0; i < pop.size(); ++i) pop.agents[i].sigma = sigma[i];
  return sigma;
}

std::vector<std::size_t> adoption_round(std::vector<AgentLearner>& learners,
                                        const AgentGraph& comm, double tau_comm) {
  if (!(tau_comm > 0.0)) throw std::invalid_argument("tau_comm must be positive");
  const std::size_t n = learners.size();
  if (comm.size() != n) throw std::invalid_argument("communication graph size mismatch");

  // round-start snapshot
  std::vector<double> sigma(n);
  std::vector<MlpParams> params;
  params.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sigma[i] = learners[i].sigma;
    params.push_back(learners[i].params);
  }

  std::vector<std::size_t> adopted(n);
  std::vector<std::size_t> candidates;
  std::vector<double> weights;
  for (std::size_t i = 0; i < n; ++i) {
    candidates.assign(1, i);
    const auto& nb = comm.neighbors(i);
    candidates.insert(candidates.end(), nb.begin(), nb.end());
    std::sort(candidates.begin(), candidates.end());

    double best = -INFINITY;
    for (std::size_t j : candidates) best = std::max(best, sigma[j]);
    weights.resize(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c)
      weights[c] = std::exp((sigma[candidates[c]] - best) / tau_comm);
    adopted[i] = candidates[sample_weighted(learners[i].adoption_rng, weights)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    learners[i].sigma = sigma[adopted[i]];
    if (adopted[i] != i) learners[i].params = params[adopted[i]];
  }
  return adopted;
}

MetricsRow run_iteration(Population& pop, int k) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = pop.config;

  for (auto& a : pop.agents) a.buffer.clear();
  const auto rewards = collect_phase(pop, cfg.M);
  const ReturnStats stats = average_discounted_return(rewards, cfg.gamma);

  const TrainOptions opt = train_options(cfg);
  for (auto& a : pop.agents) train_phase(a, opt);

  evaluate_sigma(pop, cfg.E, cfg.gamma);

  switch (cfg.architecture) {
    case ArchitectureKind::Networked:
      for (int c = 0; c < cfg.C_p; ++c) {
        adoption_round(pop.agents, communication_graph(pop), cfg.tau_comm(k));
        system_step(pop);
      }
      break;
    case ArchitectureKind::Centralised:
      for (std::size_t i = 1; i < pop.size(); ++i) {
        pop.agents[i].params = pop.agents[0].params;
        pop.agents[i].target = pop.agents[0].target;
        pop.agents[i].adam = pop.agents[0].adam;
        pop.agents[i].sigma = pop.agents[0].sigma;
      }
      break;
    case ArchitectureKind::Independent:
      break;
  }

  MetricsRow row;
  row.k = k;
  row.mean_return = stats.mean;
  row.std_return = stats.std;
  row.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

TrainingResult run_training(
    const ExperimentConfig& config, std::uint64_t trial_seed,
    const std::function<void(const Population&, const MetricsRow&)>& on_iteration) {
  TrainingResult result{make_population(config, trial_seed), {}};
  const int every = config.resolved_exploitability_every();
  for (int k = 0; k < config.K; ++k) {
    MetricsRow row = run_iteration(result.population, k);
    if (every > 0 && k % every == 0) {
      const auto start = std::chrono::steady_clock::now();
      row.exploitability = approximate_exploitability(result.population,
                                                      exploitability_options(result.population));
      row.seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (on_iteration) on_iteration(result.population, row);
    result.rows.push_back(row);
  }
  return result;
}

void write_checkpoint(const std::string& path, const MlpParams& params, std::uint64_t iteration) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  std::string header;
  for (int b = 0; b < 8; ++b) header.push_back(static_cast<char>((iteration >> (8 * b)) & 0xffU));
  const std::string body = serialize_params(params);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

std::pair<MlpParams, std::uint64_t> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 8) throw std::runtime_error("truncated checkpoint: " + path);
  std::uint64_t iteration = 0;
  for (int b = 0; b < 8; ++b)
    iteration |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
  return {deserialize_params(std::string_view(bytes).substr(8)), iteration};
}

}  // namespace mfgmesh
