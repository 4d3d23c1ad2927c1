#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mfgmesh/runner.hpp"

namespace py = pybind11;
using namespace mfgmesh;

namespace {

using CellTuple = std::pair<int, int>;

std::vector<Cell> to_cells(const std::vector<CellTuple>& cells) {
  std::vector<Cell> out;
  out.reserve(cells.size());
  for (auto [r, c] : cells) out.push_back({r, c});
  return out;
}

TaskKind task_from(const std::string& name) {
  auto t = parse_task(name);
  if (!t) throw py::value_error("unknown task: " + name);
  return *t;
}

Action action_from(int a) {
  if (a < 0 || a >= static_cast<int>(kNumActions)) throw py::value_error("action out of range");
  return static_cast<Action>(a);
}

py::dict config_dict(const ExperimentConfig& config) {
  py::dict d;
  for (const auto& [k, v] : config_entries(config)) d[py::str(k)] = v;
  return d;
}

py::list rows_list(const std::vector<MetricsRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["k"] = r.k;
    d["mean_return"] = r.mean_return;
    d["std_return"] = r.std_return;
    d["exploitability"] = r.exploitability ? py::cast(*r.exploitability) : py::none();
    d["seconds"] = r.seconds;
    out.append(d);
  }
  return out;
}

GridConfig grid_for(const std::string& task, int width, int height, int n_agents) {
  GridConfig g;
  g.width = width;
  g.height = height;
  g.task = task_from(task);
  g.n_agents = n_agents;
  if (g.task == TaskKind::TargetAgreement) g.targets = corner_targets(width, height);
  g.validate();
  return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core operations of the mfgmesh library";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("parse_config", [](const std::string& text) { return config_dict(parse_config_text(text)); },
        py::arg("text"), "Parse key = value text and return every resolved key.");
  m.def("load_config", [](const std::string& path) { return config_dict(load_config(path)); },
        py::arg("path"));
  m.def("format_config",
        [](const std::string& text) { return format_config(parse_config_text(text)); },
        py::arg("text"), "Canonical key = value text for a config.");

  m.def(
      "run_training",
      [](const std::string& text, std::uint64_t seed) {
        const auto config = parse_config_text(text);
        std::vector<MetricsRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_training(config, seed).rows;
        }
        return rows_list(rows);
      },
      py::arg("config_text"), py::arg("seed"), "Train one trial; returns its metric rows.");
  m.def(
      "run_trials",
      [](const std::string& text, unsigned threads) {
        const auto config = parse_config_text(text);
        std::vector<TrialResult> results;
        {
          py::gil_scoped_release release;
          results = run_trials(config, RunOptions{threads, std::nullopt});
        }
        py::list out;
        for (const auto& r : results) out.append(rows_list(r.rows));
        return out;
      },
      py::arg("config_text"), py::arg("threads") = 1);

  m.def(
      "munchausen_target",
      [](const QValues& q_now, const QValues& q_next, int action, double reward, double tau_q,
         double cl, double gamma) {
        return munchausen_target_from_q(q_now, q_next, action_from(action), reward, tau_q, cl,
                                        gamma);
      },
      py::arg("q_now"), py::arg("q_next"), py::arg("action"), py::arg("reward"),
      py::arg("tau_q") = 0.03, py::arg("cl") = -1.0, py::arg("gamma") = 0.9);
  m.def(
      "policy_from_q", [](const QValues& q, double tau) { return policy_from_q(q, tau); },
      py::arg("q"), py::arg("tau_q") = 0.03);
  m.def(
      "hidden_width_for",
      [](std::size_t input, std::size_t floor) { return hidden_width_for(input, floor); },
      py::arg("input"), py::arg("floor") = kMinHiddenWidth);

  m.def(
      "compute_reward",
      [](const std::string& task, std::size_t i, const std::vector<CellTuple>& positions,
         int action, int width, int height, std::optional<CellTuple> entity) {
        const auto grid = grid_for(task, width, height, static_cast<int>(positions.size()));
        EnvState env;
        for (const auto& c : to_cells(positions)) env.agents.push_back({c});
        if (entity) env.entity = Cell{entity->first, entity->second};
        if (has_entity(grid.task) && !env.entity) throw py::value_error("task needs an entity");
        if (i >= env.agents.size()) throw py::index_error("agent index out of range");
        const auto mu = empirical_distribution(env.agents, grid);
        return compute_reward(grid.task, i, env, action_from(action), mu, grid);
      },
      py::arg("task"), py::arg("agent"), py::arg("positions"), py::arg("action"),
      py::arg("width"), py::arg("height"), py::arg("entity") = std::nullopt);
  m.def(
      "raw_reward_bounds",
      [](const std::string& task, int width, int height, int n_agents) {
        const auto b = raw_reward_bounds(task_from(task), grid_for(task, width, height, n_agents));
        return std::make_pair(b.min, b.max);
      },
      py::arg("task"), py::arg("width"), py::arg("height"), py::arg("n_agents"));

  m.def(
      "build_radius_agent_graph",
      [](const std::vector<CellTuple>& positions, double fraction, int width, int height) {
        GridConfig g;
        g.width = width;
        g.height = height;
        return build_radius_agent_graph(to_cells(positions), fraction, g).edges();
      },
      py::arg("positions"), py::arg("radius_fraction"), py::arg("width"), py::arg("height"));
  m.def(
      "diameter",
      [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
        return diameter(AgentGraph::from_edges(n, edges));
      },
      py::arg("n"), py::arg("edges"), "Graph diameter, or None when disconnected.");

  m.def(
      "finalize_estimate_general",
      [](const std::vector<std::vector<std::size_t>>& ids_per_state, std::size_t n_agents) {
        auto count = CountVector::general(ids_per_state.size(), n_agents);
        for (std::size_t s = 0; s < ids_per_state.size(); ++s)
          for (std::size_t id : ids_per_state[s]) count.add_id(s, id);
        return finalize_estimate_general(count, n_agents).probs;
      },
      py::arg("ids_per_state"), py::arg("n_agents"));
  m.def(
      "finalize_estimate_visibility",
      [](const std::vector<std::optional<std::size_t>>& counts, std::size_t n_agents) {
        auto count = CountVector::visibility(counts.size());
        for (std::size_t s = 0; s < counts.size(); ++s)
          if (counts[s]) count.set_count(s, *counts[s]);
        return finalize_estimate_visibility(count, n_agents).probs;
      },
      py::arg("counts"), py::arg("n_agents"), "counts[s] is None for unseen states.");
  m.def(
      "estimate_visibility",
      [](const std::vector<CellTuple>& positions, int width, int height, double comm_fraction,
         double vis_fraction, std::size_t rounds) {
        GridConfig g;
        g.width = width;
        g.height = height;
        const auto cells = to_cells(positions);
        std::vector<std::size_t> states;
        for (const auto& c : cells) states.push_back(g.index(c));
        const auto comm = build_radius_agent_graph(cells, comm_fraction, g);
        const auto vis = build_visibility_graph(g, vis_fraction);
        std::vector<std::vector<double>> out;
        for (auto& est : estimate_all(states, comm, vis, rounds)) out.push_back(std::move(est.probs));
        return out;
      },
      py::arg("positions"), py::arg("width"), py::arg("height"), py::arg("comm_radius_fraction"),
      py::arg("vis_radius_fraction"), py::arg("rounds"));

  m.def(
      "average_discounted_return",
      [](const std::vector<std::vector<double>>& rewards, double gamma) {
        const auto s = average_discounted_return(rewards, gamma);
        return std::make_pair(s.mean, s.std);
      },
      py::arg("rewards"), py::arg("gamma") = 0.9, "(mean, population std) of per-agent returns.");
}
