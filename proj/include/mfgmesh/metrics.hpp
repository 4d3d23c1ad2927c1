#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace mfgmesh {

struct Population;

struct MetricsRow {
  int k = 0;
  double mean_return = 0.0;
  double std_return = 0.0;  // population std (divides by N)
  std::optional<double> exploitability;
  double seconds = 0.0;
};

struct ReturnStats {
  double mean = 0.0;
  double std = 0.0;
};

/// Discounted return sum_t gamma^t r_t of one reward sequence.
double discounted_return(std::span<const double> rewards, double gamma);

/// Mean and population std of per-agent discounted returns. All sequences
/// must have the same length.
ReturnStats average_discounted_return(std::span<const std::vector<double>> rewards, double gamma);

struct ExploitabilityOptions {
  std::size_t deviator = 0;
  int improve_loops = 50;
  int eval_loops = 10;
};

ExploitabilityOptions exploitability_options(const Population& pop);

/// Approximate exploitability of the population's joint policy.
///
/// Works on a private copy of `snapshot`: every agent except the deviator is
/// frozen, the deviator runs `improve_loops` collect/train iterations against
/// the live frozen system, then `eval_loops` evaluation loops of E steps are
/// played. The result is the deviator's best discounted return over those
/// loops minus the mean of all other agents' returns over the same loops. It
/// can be negative.
double approximate_exploitability(const Population& snapshot, const ExploitabilityOptions& opts);

}  // namespace mfgmesh
