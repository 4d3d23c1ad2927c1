#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfgmesh/env.hpp"
#include "mfgmesh/mfest.hpp"

namespace mfgmesh {

enum class ArchitectureKind { Networked, Centralised, Independent };

std::string_view to_string(ArchitectureKind arch);
std::optional<ArchitectureKind> parse_architecture(std::string_view name);
std::string_view to_string(EstimationMode mode);
std::optional<EstimationMode> parse_estimation_mode(std::string_view name);

/// Everything that determines a run. Defaults follow the reference
/// hyperparameter table; `nu` and `exploitability_every` are resolved from
/// other fields when left unset.
struct ExperimentConfig {
  std::string name;  // legend label; derived from architecture/obs mode when empty

  int width = 10;
  int height = 10;
  TaskKind task = TaskKind::Cluster;
  int n_agents = 500;
  std::vector<Cell> targets;  // target_agreement; empty means the four corners
  double shark_noise_prob = 0.01;

  ArchitectureKind architecture = ArchitectureKind::Networked;
  ObservationMode obs_mode = ObservationMode::LocalOnly;
  EstimationMode estimation = EstimationMode::Visibility;
  double comm_radius_fraction = 0.5;
  double vis_radius_fraction = 0.5;

  int K = 100;
  int M = 50;
  int L = 50;
  int E = 20;
  int C_p = 1;
  int C_e = 1;
  double gamma = 0.9;
  double tau_q = 0.03;
  double cl = -1.0;
  int batch_size = 32;
  double adam_lr = 0.01;
  std::optional<int> nu;  // L - 1 when unset
  double tau_comm_start = 0.001;
  double tau_comm_end = 1.0;

  int trials = 10;
  std::uint64_t seed = 0;
  std::optional<int> exploitability_every;  // 0 disables; 2 or 4 when unset
  int exploit_improve_loops = 50;
  int exploit_eval_loops = 10;
  int hidden_floor = 16;

  int resolved_nu() const { return nu.value_or(L - 1 > 0 ? L - 1 : 1); }
  int resolved_exploitability_every() const {
    return exploitability_every.value_or(is_population_dependent(obs_mode) ? 4 : 2);
  }
  std::string resolved_name() const;

  GridConfig grid() const;
  double tau_comm(int k) const;

  /// Throws ConfigError naming the offending key. K = 0 is accepted only
  /// when `allow_zero_iterations` is set (programmatic use).
  void validate(bool allow_zero_iterations = false) const;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat `key = value` text, one key per line, `#` starts a comment.
ExperimentConfig parse_config_text(std::string_view text);
/// Every key with its resolved value; parse_config_text round-trips it exactly.
std::string format_config(const ExperimentConfig& config);
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);

}  // namespace mfgmesh
