// Command line front end: run / plot / exploit.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfgmesh/runner.hpp"

namespace fs = std::filesystem;
using namespace mfgmesh;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

int cmd_run(const std::string& config_path, const std::string& out, bool force,
            bool checkpoints) {
  const ExperimentConfig config = load_config(config_path);
  prepare_output_dir(out, force);
  RunOptions opts;
  opts.threads = worker_count();
  if (checkpoints) opts.checkpoint_dir = fs::path(out) / "checkpoints";
  std::cerr << "running " << config.trials << " trial(s) of " << config.resolved_name()
            << " on " << opts.threads << " worker(s)\n";
  const auto results = run_trials(config, opts);
  export_results(results, config, out);
  emit_plots({read_summary(out)}, out);
  std::cout << "wrote " << results.size() << " trial(s) to " << out << "\n";
  return kExitOk;
}

// Each directory is either a run directory or a parent of run directories.
std::vector<nlohmann::json> collect_summaries(const std::vector<std::string>& dirs) {
  std::vector<nlohmann::json> out;
  for (const auto& d : dirs) {
    if (fs::exists(fs::path(d) / "summary.json")) {
      out.push_back(read_summary(d));
      continue;
    }
    std::vector<fs::path> subdirs;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(d, ec))
      if (entry.is_directory() && fs::exists(entry.path() / "summary.json"))
        subdirs.push_back(entry.path());
    if (ec) throw IoError("cannot list " + d + ": " + ec.message());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& s : subdirs) out.push_back(read_summary(s));
  }
  if (out.empty()) throw IoError("no summary.json found");
  return out;
}

int cmd_plot(const std::vector<std::string>& dirs, const std::string& out) {
  const auto summaries = collect_summaries(dirs);
  const fs::path target = out.empty() ? fs::path(dirs.front()) : fs::path(out);
  std::error_code ec;
  fs::create_directories(target, ec);
  emit_plots(summaries, target);
  std::cout << "wrote return.svg and exploitability.svg to " << target.string() << "\n";
  return kExitOk;
}

int cmd_exploit(const std::string& dir, int deviator) {
  const Population pop = read_population_checkpoint(dir);
  auto opts = exploitability_options(pop);
  if (deviator < 0 || static_cast<std::size_t>(deviator) >= pop.size())
    throw ConfigError("deviator", "must be in [0, n_agents)");
  opts.deviator = static_cast<std::size_t>(deviator);
  const double ex = approximate_exploitability(pop, opts);
  std::printf("exploitability %.17g\n", ex);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralised mean-field learners on a grid"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path, out_dir;
  bool force = false, checkpoints = false;
  auto* run = app.add_subcommand("run", "Train all trials of a config and write results");
  run->add_option("config", config_path, "key = value config file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("--force", force, "overwrite an existing output directory");
  run->add_flag("--checkpoints", checkpoints, "write final per-agent checkpoints");

  std::vector<std::string> plot_dirs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG plots from summary.json files");
  plot->add_option("dir", plot_dirs, "run directories (or a parent of several)")->required();
  plot->add_option("--out", plot_out, "where to write the SVGs (default: first dir)");

  std::string ckpt_dir;
  int deviator = 0;
  auto* exploit = app.add_subcommand("exploit", "Approximate exploitability of a checkpoint");
  exploit->add_option("checkpoint-dir", ckpt_dir, "directory written by run --checkpoints")
      ->required();
  exploit->add_option("--deviator", deviator, "index of the deviating agent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, force, checkpoints);
    if (*plot) return cmd_plot(plot_dirs, plot_out);
    if (*exploit) return cmd_exploit(ckpt_dir, deviator);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
