#include "mfgmesh/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

namespace mfgmesh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(var / static_cast<double>(v.size()));
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

ExperimentConfig load_config(const fs::path& path) {
  return parse_config_text(read_file(path));
}

unsigned worker_count() {
  unsigned hw = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MFGMESH_THREADS")) {
    unsigned cap = 0;
    const std::string_view s{env};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (res.ec == std::errc{} && cap > 0) return cap;
  }
  return hw;
}

std::vector<TrialResult> run_trials(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto trials = static_cast<std::size_t>(config.trials);
  std::vector<TrialResult> results(trials);
  std::vector<std::exception_ptr> errors(trials);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) {
      try {
        const auto seed = trial_seed(config, static_cast<int>(t));
        auto trained = run_training(config, seed);
        TrialResult r{static_cast<int>(t), seed, std::move(trained.rows), {}};
        if (options.checkpoint_dir) {
          const fs::path dir = *options.checkpoint_dir / ("trial_" + std::to_string(t));
          write_population_checkpoint(trained.population, seed, config.K, dir);
          for (std::size_t i = 0; i < trained.population.size(); ++i)
            r.checkpoints.push_back((dir / ("agent_" + std::to_string(i) + ".ckpt")).string());
        }
        results[t] = std::move(r);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };

  const unsigned threads = std::max(1U, std::min<unsigned>(options.threads,
                                                           static_cast<unsigned>(trials)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

void prepare_output_dir(const fs::path& out_dir, bool force) {
  std::error_code ec;
  if (fs::exists(out_dir, ec) && !force)
    throw IoError(out_dir.string() + " already exists (pass --force to overwrite)");
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
}

std::string trial_csv(const TrialResult& result) {
  std::string out = std::string{kCsvHeader} + "\n";
  for (const auto& row : result.rows) {
    char seconds[32];
    std::snprintf(seconds, sizeof seconds, "%.6f", row.seconds);
    out += std::to_string(row.k) + "," + format_double(row.mean_return) + "," +
           format_double(row.std_return) + "," +
           (row.exploitability ? format_double(*row.exploitability) : std::string{}) + "," +
           seconds + "\n";
  }
  return out;
}

json summarize(const std::vector<TrialResult>& results, const ExperimentConfig& config) {
  json cfg = json::object();
  for (const auto& [key, value] : config_entries(config)) cfg[key] = value;

  const std::size_t iterations = results.empty() ? 0 : results.front().rows.size();
  json per_k = json::array();
  for (std::size_t k = 0; k < iterations; ++k) {
    std::vector<double> returns, exploit;
    for (const auto& r : results) {
      returns.push_back(r.rows.at(k).mean_return);
      if (r.rows.at(k).exploitability) exploit.push_back(*r.rows.at(k).exploitability);
    }
    const auto ret = mean_std(returns);
    json entry = {{"k", static_cast<int>(k)},
                  {"mean_return", ret.mean},
                  {"mean_return_std", ret.std},
                  {"exploitability", nullptr},
                  {"exploitability_std", nullptr},
                  {"exploitability_trials", exploit.size()}};
    if (!exploit.empty()) {
      const auto ex = mean_std(exploit);
      entry["exploitability"] = ex.mean;
      entry["exploitability_std"] = ex.std;
    }
    per_k.push_back(std::move(entry));
  }

  json seeds = json::array();
  for (const auto& r : results) seeds.push_back(r.seed);
  return {{"config", cfg},
          {"config_text", format_config(config)},
          {"label", config.resolved_name()},
          {"trials", results.size()},
          {"std_kind", "population (divide by count)"},
          {"seeds", seeds},
          {"per_k", per_k}};
}

void export_results(const std::vector<TrialResult>& results, const ExperimentConfig& config,
                    const fs::path& out_dir) {
  for (const auto& r : results)
    write_file(out_dir / ("trial_" + std::to_string(r.trial) + ".csv"), trial_csv(r));
  write_file(out_dir / "summary.json", summarize(results, config).dump(2) + "\n");
  write_file(out_dir / "config.cfg", format_config(config));

  const std::size_t in = observation_size(config.grid(), config.obs_mode);
  const std::size_t pow2 = hidden_width_for(in, 1);
  const std::size_t hidden = hidden_width_for(in, static_cast<std::size_t>(config.hidden_floor));
  json seeds = json::array();
  for (const auto& r : results) seeds.push_back(r.seed);
  const json meta = {{"version", kVersion},
                     {"seeds", seeds},
                     {"seed_rule", "config.seed + trial"},
                     {"input_size", in},
                     {"hidden_width", hidden},
                     {"hidden_floor_applied", hidden != pow2},
                     {"csv_header", kCsvHeader},
                     {"std_kind", "population (divide by N)"}};
  write_file(out_dir / "metadata.json", meta.dump(2) + "\n");
}

void write_population_checkpoint(const Population& pop, std::uint64_t trial_seed, int iteration,
                                 const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "config.cfg", format_config(pop.config));

  std::ostringstream env;
  env << "seed " << trial_seed << "\n";
  env << "time " << pop.env.time << "\n";
  if (pop.env.entity)
    env << "entity " << pop.env.entity->row << " " << pop.env.entity->col << "\n";
  else
    env << "entity none\n";
  env << "agents " << pop.env.agents.size() << "\n";
  for (const auto& a : pop.env.agents) env << a.pos.row << " " << a.pos.col << "\n";
  write_file(dir / "env_state.txt", env.str());

  for (std::size_t i = 0; i < pop.size(); ++i) {
    try {
      write_checkpoint((dir / ("agent_" + std::to_string(i) + ".ckpt")).string(),
                       pop.agents[i].params, static_cast<std::uint64_t>(iteration));
    } catch (const std::runtime_error& e) {
      throw IoError(e.what());
    }
  }
}

Population read_population_checkpoint(const fs::path& dir) {
  const ExperimentConfig config = load_config(dir / "config.cfg");
  std::istringstream env(read_file(dir / "env_state.txt"));
  std::string word, entity_a;
  std::uint64_t seed = 0;
  long long time = 0;
  std::size_t count = 0;
  env >> word >> seed >> word >> time >> word >> entity_a;
  if (!env) throw IoError("malformed env_state.txt in " + dir.string());

  Population pop = make_population(config, seed);
  if (entity_a == "none") {
    pop.env.entity.reset();
  } else {
    Cell c;
    c.row = std::stoi(entity_a);
    env >> c.col;
    pop.env.entity = c;
  }
  env >> word >> count;
  if (!env || count != pop.size()) throw IoError("agent count mismatch in " + dir.string());
  for (auto& a : pop.env.agents) env >> a.pos.row >> a.pos.col;
  if (!env) throw IoError("truncated env_state.txt in " + dir.string());
  pop.env.time = time;
  pop.obs_cache_time = -1;

  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto path = dir / ("agent_" + std::to_string(i) + ".ckpt");
    try {
      auto [params, iteration] = read_checkpoint(path.string());
      if (params.input_size() != pop.observation_length())
        throw IoError("checkpoint input size does not match config: " + path.string());
      pop.agents[i].params = params;
      pop.agents[i].target = params;
      pop.agents[i].adam = AdamState::for_params(params, config.adam_lr);
    } catch (const IoError&) {
      throw;
    } catch (const std::runtime_error& e) {
      throw IoError(e.what());
    }
  }
  return pop;
}

json read_summary(const fs::path& dir) {
  const fs::path path = dir / "summary.json";
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
}

std::string render_plot_svg(const std::vector<json>& summaries, PlotMetric metric) {
  if (summaries.empty()) throw IoError("no summary to plot");
  const char* mean_key = metric == PlotMetric::Return ? "mean_return" : "exploitability";
  const char* std_key = metric == PlotMetric::Return ? "mean_return_std" : "exploitability_std";
  const char* title = metric == PlotMetric::Return ? "Average discounted return"
                                                   : "Approximate exploitability";
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                            "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  struct Series {
    std::string label;
    std::vector<double> k, mean, std;
  };
  std::vector<Series> series;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : summaries) {
    if (!s.contains("per_k")) throw IoError("summary has no per_k entries");
    Series out;
    out.label = s.value("label", std::string{"run"});
    for (const auto& e : s.at("per_k")) {
      if (e.at(mean_key).is_null()) continue;
      const double k = e.at("k").get<double>();
      const double m = e.at(mean_key).get<double>();
      const double sd = e.at(std_key).get<double>();
      out.k.push_back(k);
      out.mean.push_back(m);
      out.std.push_back(sd);
      xmin = std::min(xmin, k);
      xmax = std::max(xmax, k);
      ymin = std::min(ymin, m - sd);
      ymax = std::max(ymax, m + sd);
    }
    series.push_back(std::move(out));
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  constexpr double W = 640, H = 400, left = 60, right = 20, top = 40, bottom = 50;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (W - left - right); };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * (H - top - bottom); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n"
      << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right
      << "\" y2=\"" << H - bottom << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << H - bottom << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">iteration k</text>\n"
      << "<text x=\"" << left - 6 << "\" y=\"" << py(ymax) + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << num(ymax) << "</text>\n"
      << "<text x=\"" << left - 6 << "\" y=\"" << py(ymin) + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << num(ymin) << "</text>\n"
      << "<text x=\"" << px(xmin) << "\" y=\"" << H - bottom + 14
      << "\" text-anchor=\"middle\" font-size=\"10\">" << num(xmin) << "</text>\n"
      << "<text x=\"" << px(xmax) << "\" y=\"" << H - bottom + 14
      << "\" text-anchor=\"middle\" font-size=\"10\">" << num(xmax) << "</text>\n";

  for (std::size_t v = 0; v < series.size(); ++v) {
    const auto& s = series[v];
    const char* color = kColors[v % std::size(kColors)];
    if (!s.k.empty()) {
      svg << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.k.size(); ++i)
        svg << px(s.k[i]) << "," << py(s.mean[i] + s.std[i]) << " ";
      for (std::size_t i = s.k.size(); i-- > 0;)
        svg << px(s.k[i]) << "," << py(s.mean[i] - s.std[i]) << " ";
      svg << "\"/>\n<polyline class=\"mean\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.k.size(); ++i) svg << px(s.k[i]) << "," << py(s.mean[i]) << " ";
      svg << "\"/>\n";
    }
    const double ly = top + 8 + 16.0 * static_cast<double>(v);
    svg << "<g class=\"legend-entry\"><rect x=\"" << W - right - 150 << "\" y=\"" << ly - 8
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/><text x=\""
        << W - right - 132 << "\" y=\"" << ly + 2 << "\" font-size=\"11\">"
        << xml_escape(s.label) << "</text></g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plots(const std::vector<json>& summaries, const fs::path& out_dir) {
  write_file(out_dir / "return.svg", render_plot_svg(summaries, PlotMetric::Return));
  write_file(out_dir / "exploitability.svg",
             render_plot_svg(summaries, PlotMetric::Exploitability));
}

}  // namespace mfgmesh
