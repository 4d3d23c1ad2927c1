#include "mfgmesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfgmesh/learner.hpp"

namespace mfgmesh {

double discounted_return(std::span<const double> rewards, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

ReturnStats average_discounted_return(std::span<const std::vector<double>> rewards,
                                      double gamma) {
  if (rewards.empty()) return {};
  const std::size_t len = rewards.front().size();
  std::vector<double> returns;
  returns.reserve(rewards.size());
  for (const auto& seq : rewards) {
    if (seq.size() != len) throw std::invalid_argument("reward sequences differ in length");
    returns.push_back(discounted_return(seq, gamma));
  }
  const double n = static_cast<double>(returns.size());
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  return {mean, std::sqrt(var / n)};
}

ExploitabilityOptions exploitability_options(const Population& pop) {
  return {0, pop.config.exploit_improve_loops, pop.config.exploit_eval_loops};
}

double approximate_exploitability(const Population& snapshot, const ExploitabilityOptions& opts) {
  Population pop = snapshot;
  const std::size_t n = pop.size();
  const std::size_t d = opts.deviator;
  if (d >= n) throw std::out_of_range("deviator index out of range");
  const auto& cfg = pop.config;
  const TrainOptions train = train_options(cfg);

  for (int loop = 0; loop < opts.improve_loops; ++loop) {
    for (auto& a : pop.agents) a.buffer.clear();
    collect_phase(pop, cfg.M);
    train_phase(pop.agents[d], train);
  }

  double best = -std::numeric_limits<double>::infinity();
  double others = 0.0;
  std::size_t others_count = 0;
  std::vector<std::vector<double>> rewards(n);
  for (int loop = 0; loop < opts.eval_loops; ++loop) {
    for (auto& r : rewards) r.clear();
    for (int e = 0; e < cfg.E; ++e) {
      const StepRecord rec = system_step(pop);
      for (std::size_t i = 0; i < n; ++i) rewards[i].push_back(rec.rewards[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double ret = discounted_return(rewards[i], cfg.gamma);
      if (i == d) {
        best = std::max(best, ret);
      } else {
        others += ret;
        ++others_count;
      }
    }
  }
  return best - others / static_cast<double>(others_count);
}

}  // namespace mfgmesh
