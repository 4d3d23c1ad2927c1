#include "mfgmesh/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace mfgmesh {

std::string_view to_string(ArchitectureKind arch) {
  switch (arch) {
    case ArchitectureKind::Networked: return "networked";
    case ArchitectureKind::Centralised: return "centralised";
    case ArchitectureKind::Independent: return "independent";
  }
  return "?";
}

std::optional<ArchitectureKind> parse_architecture(std::string_view name) {
  for (auto a : {ArchitectureKind::Networked, ArchitectureKind::Centralised,
                 ArchitectureKind::Independent})
    if (to_string(a) == name) return a;
  return std::nullopt;
}

std::string_view to_string(EstimationMode mode) {
  return mode == EstimationMode::General ? "general" : "visibility";
}

std::optional<EstimationMode> parse_estimation_mode(std::string_view name) {
  if (name == "general") return EstimationMode::General;
  if (name == "visibility") return EstimationMode::Visibility;
  return std::nullopt;
}

std::string ExperimentConfig::resolved_name() const {
  if (!name.empty()) return name;
  std::string out{to_string(architecture)};
  if (architecture == ArchitectureKind::Networked) {
    std::ostringstream r;
    r << comm_radius_fraction;
    out += " r=" + r.str();
  }
  if (is_population_dependent(obs_mode)) out += " (" + std::string{to_string(obs_mode)} + ")";
  return out;
}

GridConfig ExperimentConfig::grid() const {
  GridConfig g;
  g.width = width;
  g.height = height;
  g.task = task;
  g.n_agents = n_agents;
  g.shark_noise_prob = shark_noise_prob;
  if (task == TaskKind::TargetAgreement)
    g.targets = targets.empty() ? corner_targets(width, height) : targets;
  return g;
}

double ExperimentConfig::tau_comm(int k) const {
  if (K <= 1) return tau_comm_start;
  return tau_comm_start +
         (tau_comm_end - tau_comm_start) * static_cast<double>(k) / static_cast<double>(K - 1);
}

void ExperimentConfig::validate(bool allow_zero_iterations) const {
  auto require = [](bool ok, const char* key, const char* msg) {
    if (!ok) throw ConfigError(key, msg);
  };
  require(width >= 2, "width", "must be >= 2");
  require(height >= 2, "height", "must be >= 2");
  require(n_agents >= 2, "n_agents", "must be >= 2");
  for (const Cell& t : targets)
    require(t.row >= 0 && t.row < height && t.col >= 0 && t.col < width, "targets",
            "target outside the grid");
  require(shark_noise_prob >= 0.0 && shark_noise_prob <= 1.0, "shark_noise_prob",
          "must lie in [0,1]");
  require(comm_radius_fraction >= 0.0 && comm_radius_fraction <= 1.0, "comm_radius_fraction",
          "must lie in [0,1]");
  require(vis_radius_fraction >= 0.0 && vis_radius_fraction <= 1.0, "vis_radius_fraction",
          "must lie in [0,1]");
  require(allow_zero_iterations ? K >= 0 : K >= 1, "K", "must be >= 1");
  require(M >= 1, "M", "must be >= 1");
  require(L >= 0, "L", "must be >= 0");
  require(E >= 1, "E", "must be >= 1");
  require(C_p >= 0, "C_p", "must be >= 0");
  require(C_e >= 0, "C_e", "must be >= 0");
  require(gamma >= 0.0 && gamma < 1.0, "gamma", "must lie in [0,1)");
  require(tau_q > 0.0, "tau_q", "must be > 0");
  require(cl < 0.0, "cl", "must be < 0");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(adam_lr > 0.0, "adam_lr", "must be > 0");
  require(resolved_nu() >= 1, "nu", "must be >= 1");
  require(tau_comm_start > 0.0, "tau_comm_start", "must be > 0");
  require(tau_comm_end > 0.0, "tau_comm_end", "must be > 0");
  require(trials >= 1, "trials", "must be >= 1");
  require(resolved_exploitability_every() >= 0, "exploitability_every", "must be >= 0");
  require(exploit_improve_loops >= 0, "exploit_improve_loops", "must be >= 0");
  require(exploit_eval_loops >= 1, "exploit_eval_loops", "must be >= 1");
  require(hidden_floor >= 1, "hidden_floor", "must be >= 1");
  require(!(architecture == ArchitectureKind::Centralised &&
            obs_mode == ObservationMode::EstimatedMeanField),
          "obs_mode", "centralised learners observe the true mean field; use 'global'");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string{s.substr(b, e - b + 1)};
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError(key, "cannot parse '" + value + "' as a number");
  return out;
}

std::vector<Cell> parse_targets(const std::string& value) {
  std::vector<Cell> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw ConfigError("targets", "expected 'row,col;row,col'");
    out.push_back({parse_number<int>("targets", trim(item.substr(0, comma))),
                   parse_number<int>("targets", trim(item.substr(comma + 1)))});
  }
  return out;
}

std::string format_targets(const std::vector<Cell>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(cells[i].row) + ',' + std::to_string(cells[i].col);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

template <typename T>
Setter number_setter(const char* key, T ExperimentConfig::*field) {
  return [key, field](ExperimentConfig& c, const std::string& v) {
    c.*field = parse_number<T>(key, v);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"name", [](ExperimentConfig& c, const std::string& v) { c.name = v; }},
      {"width", number_setter("width", &ExperimentConfig::width)},
      {"height", number_setter("height", &ExperimentConfig::height)},
      {"task",
       [](ExperimentConfig& c, const std::string& v) {
         auto t = parse_task(v);
         if (!t) throw ConfigError("task", "unknown task '" + v + "'");
         c.task = *t;
       }},
      {"n_agents", number_setter("n_agents", &ExperimentConfig::n_agents)},
      {"targets", [](ExperimentConfig& c, const std::string& v) { c.targets = parse_targets(v); }},
      {"shark_noise_prob", number_setter("shark_noise_prob", &ExperimentConfig::shark_noise_prob)},
      {"architecture",
       [](ExperimentConfig& c, const std::string& v) {
         auto a = parse_architecture(v);
         if (!a) throw ConfigError("architecture", "unknown architecture '" + v + "'");
         c.architecture = *a;
       }},
      {"obs_mode",
       [](ExperimentConfig& c, const std::string& v) {
         auto m = parse_observation_mode(v);
         if (!m) throw ConfigError("obs_mode", "unknown observation mode '" + v + "'");
         c.obs_mode = *m;
       }},
      {"estimation",
       [](ExperimentConfig& c, const std::string& v) {
         auto m = parse_estimation_mode(v);
         if (!m) throw ConfigError("estimation", "unknown estimation mode '" + v + "'");
         c.estimation = *m;
       }},
      {"comm_radius_fraction",
       number_setter("comm_radius_fraction", &ExperimentConfig::comm_radius_fraction)},
      {"vis_radius_fraction",
       number_setter("vis_radius_fraction", &ExperimentConfig::vis_radius_fraction)},
      {"K", number_setter("K", &ExperimentConfig::K)},
      {"M", number_setter("M", &ExperimentConfig::M)},
      {"L", number_setter("L", &ExperimentConfig::L)},
      {"E", number_setter("E", &ExperimentConfig::E)},
      {"C_p", number_setter("C_p", &ExperimentConfig::C_p)},
      {"C_e", number_setter("C_e", &ExperimentConfig::C_e)},
      {"gamma", number_setter("gamma", &ExperimentConfig::gamma)},
      {"tau_q", number_setter("tau_q", &ExperimentConfig::tau_q)},
      {"cl", number_setter("cl", &ExperimentConfig::cl)},
      {"batch_size", number_setter("batch_size", &ExperimentConfig::batch_size)},
      {"adam_lr", number_setter("adam_lr", &ExperimentConfig::adam_lr)},
      {"nu", [](ExperimentConfig& c, const std::string& v) { c.nu = parse_number<int>("nu", v); }},
      {"tau_comm_start", number_setter("tau_comm_start", &ExperimentConfig::tau_comm_start)},
      {"tau_comm_end", number_setter("tau_comm_end", &ExperimentConfig::tau_comm_end)},
      {"trials", number_setter("trials", &ExperimentConfig::trials)},
      {"seed", number_setter("seed", &ExperimentConfig::seed)},
      {"exploitability_every",
       [](ExperimentConfig& c, const std::string& v) {
         c.exploitability_every = parse_number<int>("exploitability_every", v);
       }},
      {"exploit_improve_loops",
       number_setter("exploit_improve_loops", &ExperimentConfig::exploit_improve_loops)},
      {"exploit_eval_loops",
       number_setter("exploit_eval_loops", &ExperimentConfig::exploit_eval_loops)},
      {"hidden_floor", number_setter("hidden_floor", &ExperimentConfig::hidden_floor)},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig config;
  std::istringstream in{std::string{text}};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, "unknown key");
    it->second(config, value);
  }
  config.validate();
  return config;
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
  const GridConfig g = c.grid();
  return {
      {"name", c.resolved_name()},
      {"width", std::to_string(c.width)},
      {"height", std::to_string(c.height)},
      {"task", std::string{to_string(c.task)}},
      {"n_agents", std::to_string(c.n_agents)},
      {"targets", format_targets(g.targets)},
      {"shark_noise_prob", format_double(c.shark_noise_prob)},
      {"architecture", std::string{to_string(c.architecture)}},
      {"obs_mode", std::string{to_string(c.obs_mode)}},
      {"estimation", std::string{to_string(c.estimation)}},
      {"comm_radius_fraction", format_double(c.comm_radius_fraction)},
      {"vis_radius_fraction", format_double(c.vis_radius_fraction)},
      {"K", std::to_string(c.K)},
      {"M", std::to_string(c.M)},
      {"L", std::to_string(c.L)},
      {"E", std::to_string(c.E)},
      {"C_p", std::to_string(c.C_p)},
      {"C_e", std::to_string(c.C_e)},
      {"gamma", format_double(c.gamma)},
      {"tau_q", format_double(c.tau_q)},
      {"cl", format_double(c.cl)},
      {"batch_size", std::to_string(c.batch_size)},
      {"adam_lr", format_double(c.adam_lr)},
      {"nu", std::to_string(c.resolved_nu())},
      {"tau_comm_start", format_double(c.tau_comm_start)},
      {"tau_comm_end", format_double(c.tau_comm_end)},
      {"trials", std::to_string(c.trials)},
      {"seed", std::to_string(c.seed)},
      {"exploitability_every", std::to_string(c.resolved_exploitability_every())},
      {"exploit_improve_loops", std::to_string(c.exploit_improve_loops)},
      {"exploit_eval_loops", std::to_string(c.exploit_eval_loops)},
      {"hidden_floor", std::to_string(c.hidden_floor)},
  };
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) out += key + " = " + value + "\n";
  return out;
}

}  // namespace mfgmesh
