#ifndef MAGEC_EXPERIMENT_HPP_
#define MAGEC_EXPERIMENT_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "magec/actor.hpp"
#include "magec/baselines.hpp"
#include "magec/environment.hpp"

namespace magec {

struct EvalPolicy {
  enum class Kind { Magec, Random, Greedy };
  Kind kind = Kind::Random;
  ActorParams* actor = nullptr;  // required for Magec
  bool stochastic = false;       // Magec only: sample instead of argmax
};

inline EvalPolicy::Kind parse_policy_kind(const std::string& s) {
  if (s == "magec") return EvalPolicy::Kind::Magec;
  if (s == "random") return EvalPolicy::Kind::Random;
  if (s == "greedy") return EvalPolicy::Kind::Greedy;
  throw std::runtime_error("unknown policy '" + s +
                           "' (expected magec|random|greedy)");
}

/// Per-step evaluation series plus summary figures; every summary value is
/// recomputable from the series.
struct MetricsRecord {
  uint64_t seed = 0;
  std::vector<double> avg_idleness;
  std::vector<double> worst_idleness;
  std::vector<double> idleness_std;
  std::vector<int> living_agents;

  int horizon() const { return static_cast<int>(avg_idleness.size()); }

  double time_avg_idleness() const {
    double s = 0.0;
    for (double x : avg_idleness) s += x;
    return s / avg_idleness.size();
  }
  double final_avg_idleness() const { return avg_idleness.back(); }
  /// Largest idleness any node ever attains: the longest inter-visit gap.
  double max_intervisit_gap() const {
    double s = 0.0;
    for (double x : worst_idleness) s = std::max(s, x);
    return s;
  }
  /// Same, restricted to steps at or after `from_step` (1-based step index).
  double max_intervisit_gap_after(long from_step) const {
    double s = 0.0;
    for (size_t i = 0; i < worst_idleness.size(); ++i)
      if (static_cast<long>(i) + 1 >= from_step)
        s = std::max(s, worst_idleness[i]);
    return s;
  }
  double time_avg_idleness_after(long from_step) const {
    double s = 0.0;
    long n = 0;
    for (size_t i = 0; i < avg_idleness.size(); ++i)
      if (static_cast<long>(i) + 1 >= from_step) {
        s += avg_idleness[i];
        ++n;
      }
    return n > 0 ? s / n : 0.0;
  }
};

inline int select_eval_action(const EvalPolicy& pol, const Observation& obs,
                              std::mt19937_64& rng) {
  switch (pol.kind) {
    case EvalPolicy::Kind::Random:
      return random_walk_policy(obs, rng);
    case EvalPolicy::Kind::Greedy:
      return greedy_idleness_policy(obs);
    case EvalPolicy::Kind::Magec: {
      if (!pol.actor) throw std::runtime_error("magec policy needs a checkpoint");
      Tape tape;
      Tensor logp = policy_log_probs(tape, obs, *pol.actor);
      return pol.stochastic ? sample_action(logp.val(), obs.mask, rng)
                            : argmax_action(logp.val(), obs.mask);
    }
  }
  throw std::runtime_error("unreachable");
}

/// One evaluation run under a disturbance schedule. Execution-only: the
/// critic is never touched here.
inline MetricsRecord evaluate_run(const PatrolGraph& graph, EnvConfig env_cfg,
                                  const DisturbanceSchedule& sched,
                                  const EvalPolicy& pol, int horizon,
                                  uint64_t seed) {
  env_cfg.comm_success = sched.comm_success;
  env_cfg.telemetry_period = sched.telemetry_period;
  env_cfg.episode_len = horizon;
  PatrolEnv env(graph, env_cfg);
  env.reset(seed);
  std::mt19937_64 policy_rng(seed ^ 0xa5a5a5a55a5a5a5aull);

  MetricsRecord rec;
  rec.seed = seed;
  while (env.state().clock < horizon) {
    for (const auto& [step, agent] : sched.attrition)
      if (step == env.state().clock && env.state().agents[agent].alive)
        env.apply_attrition(agent);
    std::vector<int> actions;
    for (int id : env.living_agents()) {
      if (env.state().agents[id].loc.at_node_p())
        actions.push_back(select_eval_action(pol, env.observe(id), policy_rng));
      else
        actions.push_back(env.forced_continue_action(id));
    }
    env.step(actions);
    rec.avg_idleness.push_back(average_idleness(env.state()));
    rec.worst_idleness.push_back(worst_idleness(env.state()));
    rec.idleness_std.push_back(idleness_std(env.state()));
    rec.living_agents.push_back(static_cast<int>(env.living_agents().size()));
  }
  return rec;
}

inline MetricsRecord mean_record(const std::vector<MetricsRecord>& runs) {
  MetricsRecord mean;
  const int h = runs.at(0).horizon();
  for (const auto& r : runs)
    if (r.horizon() != h)
      throw std::runtime_error("runs have mismatched horizons");
  mean.avg_idleness.assign(h, 0.0);
  mean.worst_idleness.assign(h, 0.0);
  mean.idleness_std.assign(h, 0.0);
  mean.living_agents.assign(h, 0);
  for (const auto& r : runs)
    for (int t = 0; t < h; ++t) {
      mean.avg_idleness[t] += r.avg_idleness[t] / runs.size();
      mean.worst_idleness[t] += r.worst_idleness[t] / runs.size();
      mean.idleness_std[t] += r.idleness_std[t] / runs.size();
      mean.living_agents[t] += r.living_agents[t];
    }
  for (int t = 0; t < h; ++t) mean.living_agents[t] /= static_cast<int>(runs.size());
  return mean;
}

inline void write_metrics_csv(const std::string& path,
                              const MetricsRecord& rec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,avg_idleness,worst_idleness,idleness_std,living_agents\n";
  char buf[160];
  for (int t = 0; t < rec.horizon(); ++t) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%d\n", t + 1,
                  rec.avg_idleness[t], rec.worst_idleness[t],
                  rec.idleness_std[t], rec.living_agents[t]);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// SVG output: a hand-rolled polyline plot, no plotting dependency.
// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::string color;
  const std::vector<double>* values = nullptr;
};

inline void write_svg_plot(const std::string& path,
                           const std::vector<PlotSeries>& series,
                           const std::vector<long>& markers,
                           const std::string& title) {
  const int W = 720, H = 420, ML = 60, MR = 20, MT = 40, MB = 40;
  double ymax = 1e-9;
  size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values->size());
    for (double v : *s.values) ymax = std::max(ymax, v);
  }
  if (n < 2) n = 2;
  auto px = [&](double t) {
    return ML + (W - ML - MR) * t / double(n - 1);
  };
  auto py = [&](double v) { return H - MB - (H - MT - MB) * v / ymax; };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n";
  // axes
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" "
                "stroke=\"black\"/>\n",
                ML, H - MB, W - MR, H - MB);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" "
                "stroke=\"black\"/>\n",
                ML, MT, ML, H - MB);
  out << buf;
  for (int i = 0; i <= 4; ++i) {
    const double v = ymax * i / 4.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\" "
                  "font-family=\"sans-serif\" font-size=\"11\">%.3g</text>\n",
                  ML - 6, py(v) + 4, v);
    out << buf;
  }
  for (long m : markers) {
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" "
                  "stroke=\"gray\" stroke-dasharray=\"4,3\"/>\n",
                  px(double(m)), MT, px(double(m)), H - MB);
    out << buf;
  }
  int li = 0;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\" points=\"";
    for (size_t t = 0; t < s.values->size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px(double(t)),
                    py((*s.values)[t]));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" "
                  "font-size=\"12\" fill=\"%s\">%s</text>\n",
                  W - MR - 180, MT + 16 * (li + 1), s.color.c_str(),
                  s.label.c_str());
    out << buf;
    ++li;
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Batch evaluation and comparison.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string graph_file;
  std::string policy = "random";
  std::string checkpoint;       // actor weights, magec only
  std::string policy_info;      // architecture dump next to the checkpoint
  int n_agents = 2;
  double obs_radius = std::numeric_limits<double>::infinity();
  double comm_success = 1.0;
  std::vector<std::pair<long, int>> attrition;
  int horizon = 1800;
  int repeat = 3;
  uint64_t seed = 0;
  double zeta_scale = 50.0;
  int telemetry_period = 1;
  int max_neighbors = 10;
  bool stochastic_eval = false;
  std::string out_dir = "eval_out";
};

struct EvaluationOutput {
  std::vector<MetricsRecord> runs;
  MetricsRecord mean;
};

inline EvaluationOutput run_evaluation(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.repeat < 1) throw std::runtime_error("repeat must be >= 1");
  if (cfg.horizon < 1) throw std::runtime_error("horizon must be >= 1");

  std::ifstream gf(cfg.graph_file);
  if (!gf) throw std::runtime_error("cannot read graph: " + cfg.graph_file);
  std::string text((std::istreambuf_iterator<char>(gf)),
                   std::istreambuf_iterator<char>());
  const PatrolGraph graph = load_graph(text);

  EvalPolicy pol;
  pol.kind = parse_policy_kind(cfg.policy);
  pol.stochastic = cfg.stochastic_eval;
  std::unique_ptr<ActorParams> actor;
  if (pol.kind == EvalPolicy::Kind::Magec) {
    if (cfg.checkpoint.empty())
      throw std::runtime_error("magec policy requires --checkpoint");
    std::string info_path = cfg.policy_info;
    if (info_path.empty())
      info_path = fs::path(cfg.checkpoint).parent_path() / "policy_info.txt";
    std::ifstream inf(info_path);
    if (!inf) throw std::runtime_error("cannot read policy info: " + info_path);
    std::string info_text((std::istreambuf_iterator<char>(inf)),
                          std::istreambuf_iterator<char>());
    actor = std::make_unique<ActorParams>(parse_policy_info(info_text));
    auto ps = actor->all();
    const std::vector<Param*> mut(ps.begin(), ps.end());
    load_checkpoint(cfg.checkpoint, mut);
    pol.actor = actor.get();
  }

  EnvConfig env_cfg;
  env_cfg.n_agents = cfg.n_agents;
  env_cfg.obs_radius = cfg.obs_radius;
  env_cfg.zeta_scale = cfg.zeta_scale;
  env_cfg.max_neighbors = cfg.max_neighbors;
  DisturbanceSchedule sched;
  sched.attrition = cfg.attrition;
  sched.comm_success = cfg.comm_success;
  sched.telemetry_period = cfg.telemetry_period;

  EvaluationOutput out;
  for (int r = 0; r < cfg.repeat; ++r)
    out.runs.push_back(evaluate_run(graph, env_cfg, sched, pol, cfg.horizon,
                                    cfg.seed + uint64_t(r)));
  out.mean = mean_record(out.runs);

  fs::create_directories(cfg.out_dir);
  for (size_t r = 0; r < out.runs.size(); ++r)
    write_metrics_csv(cfg.out_dir + "/metrics_run" + std::to_string(r) + ".csv",
                      out.runs[r]);
  write_metrics_csv(cfg.out_dir + "/metrics_mean.csv", out.mean);

  nlohmann::json j;
  j["policy"] = cfg.policy;
  j["graph"] = cfg.graph_file;
  j["horizon"] = cfg.horizon;
  j["runs"] = nlohmann::json::array();
  for (const auto& run : out.runs) {
    j["runs"].push_back({{"seed", run.seed},
                         {"time_avg_idleness", run.time_avg_idleness()},
                         {"final_avg_idleness", run.final_avg_idleness()},
                         {"max_intervisit_gap", run.max_intervisit_gap()}});
  }
  j["mean"] = {{"time_avg_idleness", out.mean.time_avg_idleness()},
               {"final_avg_idleness", out.mean.final_avg_idleness()},
               {"max_intervisit_gap", out.mean.max_intervisit_gap()}};
  std::ofstream js(cfg.out_dir + "/summary.json");
  js << j.dump(2) << "\n";

  std::vector<long> markers;
  for (const auto& [step, agent] : cfg.attrition) markers.push_back(step);
  write_svg_plot(cfg.out_dir + "/plot.svg",
                 {{cfg.policy, "green", &out.mean.avg_idleness}}, markers,
                 "average idleness over time");
  return out;
}

struct ComparisonRow {
  std::string label;
  double time_avg_idleness = 0.0;
  double final_avg_idleness = 0.0;
  double max_intervisit_gap = 0.0;
};

/// Builds the summary table (sorted by time-averaged idleness) and an
/// overlaid idleness plot for a set of evaluation outputs.
inline std::vector<ComparisonRow> compare(
    const std::vector<std::pair<std::string, const MetricsRecord*>>& runs,
    const std::vector<long>& attrition_markers, const std::string& out_dir) {
  if (runs.empty()) throw std::runtime_error("compare: nothing to compare");
  const int h = runs[0].second->horizon();
  for (const auto& [label, rec] : runs)
    if (rec->horizon() != h)
      throw std::runtime_error("compare: horizon mismatch between '" +
                               runs[0].first + "' (" + std::to_string(h) +
                               ") and '" + label + "' (" +
                               std::to_string(rec->horizon()) + ")");

  std::vector<ComparisonRow> rows;
  for (const auto& [label, rec] : runs)
    rows.push_back({label, rec->time_avg_idleness(), rec->final_avg_idleness(),
                    rec->max_intervisit_gap()});
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.time_avg_idleness < b.time_avg_idleness;
  });

  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/comparison.csv");
  out << "policy,time_avg_idleness,final_avg_idleness,max_intervisit_gap\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g\n", r.label.c_str(),
                  r.time_avg_idleness, r.final_avg_idleness,
                  r.max_intervisit_gap);
    out << buf;
  }

  static const char* kColors[] = {"green", "blue",   "red",
                                  "orange", "purple", "brown"};
  std::vector<PlotSeries> series;
  for (size_t i = 0; i < runs.size(); ++i)
    series.push_back({runs[i].first, kColors[i % 6], &runs[i].second->avg_idleness});
  write_svg_plot(out_dir + "/plot.svg", series, attrition_markers,
                 "average idleness by policy");
  return rows;
}

}  // namespace magec

#endif  // MAGEC_EXPERIMENT_HPP_
