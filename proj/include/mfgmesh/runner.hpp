#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfgmesh/config.hpp"
#include "mfgmesh/learner.hpp"
#include "mfgmesh/metrics.hpp"

namespace mfgmesh {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kCsvHeader = "k,mean_return,std_return,exploitability,seconds";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  std::vector<std::string> checkpoints;  // final per-agent checkpoint paths, if written
};

/// Reads and validates a `key = value` config file; missing keys take defaults.
/// Throws ConfigError (bad content) or IoError (unreadable file).
ExperimentConfig load_config(const std::filesystem::path& path);

inline std::uint64_t trial_seed(const ExperimentConfig& config, int trial) {
  return config.seed + static_cast<std::uint64_t>(trial);
}

/// Worker cap from MFGMESH_THREADS, else the hardware concurrency.
unsigned worker_count();

struct RunOptions {
  unsigned threads = 1;
  // When set, final checkpoints go to <dir>/trial_<t>/.
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// Runs every trial (seed = config.seed + t) on up to `threads` workers.
/// Results are ordered by trial index regardless of scheduling.
std::vector<TrialResult> run_trials(const ExperimentConfig& config, const RunOptions& options);

/// Creates `out_dir`; throws IoError if it already exists and `force` is false.
void prepare_output_dir(const std::filesystem::path& out_dir, bool force);

std::string trial_csv(const TrialResult& result);
nlohmann::json summarize(const std::vector<TrialResult>& results, const ExperimentConfig& config);

/// Writes trial_<t>.csv, summary.json and metadata.json.
void export_results(const std::vector<TrialResult>& results, const ExperimentConfig& config,
                    const std::filesystem::path& out_dir);

/// Checkpoint directory: config.cfg, env_state.txt and agent_<i>.ckpt files.
void write_population_checkpoint(const Population& pop, std::uint64_t trial_seed, int iteration,
                                 const std::filesystem::path& dir);
Population read_population_checkpoint(const std::filesystem::path& dir);

enum class PlotMetric { Return, Exploitability };

/// One SVG with a mean line and a +-1 std band per summary.
std::string render_plot_svg(const std::vector<nlohmann::json>& summaries, PlotMetric metric);

/// Writes return.svg and exploitability.svg into `out_dir`.
void emit_plots(const std::vector<nlohmann::json>& summaries, const std::filesystem::path& out_dir);

nlohmann::json read_summary(const std::filesystem::path& dir);

}  // namespace mfgmesh
