// Command-line front end: training jobs, evaluation sweeps, comparisons,
// and graph utilities.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "magec/config.hpp"
#include "magec/experiment.hpp"
#include "magec/trainer.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Applies a `key = value` config file; explicit flags override afterwards.
void apply_config_file(const std::string& path, magec::ExperimentConfig& cfg) {
  for (const auto& [key, value] : magec::parse_key_value_config(read_file(path))) {
    if (key == "comm_success") cfg.comm_success = std::stod(value);
    else if (key == "obs_radius") cfg.obs_radius = std::stod(value);
    else if (key == "attrition") cfg.attrition = magec::parse_attrition(value);
    else if (key == "zeta_scale") cfg.zeta_scale = std::stod(value);
    else if (key == "episode_len") cfg.horizon = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "telemetry_period") cfg.telemetry_period = std::stoi(value);
    else throw std::runtime_error("unknown config key: " + key);
  }
}

int run_train(const std::string& graph_file, const std::string& out_dir,
              long total_steps, int n_agents, int layers, int hidden,
              int episode_len, int n_envs, uint64_t seed, double lr,
              double gamma, double obs_radius, double comm_success,
              double zeta_scale) {
  const magec::PatrolGraph graph = magec::load_graph(read_file(graph_file));

  magec::EnvConfig env_cfg;
  env_cfg.n_agents = n_agents;
  env_cfg.obs_radius = obs_radius;
  env_cfg.comm_success = comm_success;
  env_cfg.zeta_scale = zeta_scale;
  env_cfg.episode_len = episode_len;

  magec::ActorConfig actor_cfg;
  actor_cfg.layers = layers;
  actor_cfg.hidden = hidden;
  actor_cfg.max_neighbors = env_cfg.max_neighbors;
  magec::ActorParams actor(actor_cfg);
  actor.init(seed);

  magec::CriticConfig critic_cfg;
  critic_cfg.num_nodes = graph.num_nodes();
  critic_cfg.max_agents = std::max(4, n_agents);
  magec::CriticParams critic(critic_cfg);
  critic.init(seed + 1);

  magec::TrainConfig cfg;
  cfg.total_steps = total_steps;
  cfg.episode_len = episode_len;
  cfg.n_envs = n_envs;
  cfg.seed = seed;
  cfg.lr = lr;
  cfg.gamma = gamma;

  magec::train(graph, env_cfg, actor_cfg, cfg, actor, critic, out_dir);
  std::cout << "trained " << total_steps << " env steps; checkpoint at "
            << out_dir << "/checkpoint_final.txt\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAGEC patrolling workbench"};
  app.require_subcommand(1);

  // ---- train ----
  auto* train = app.add_subcommand("train", "train a policy on a graph");
  std::string t_graph, t_out = "train_out";
  long t_steps = 100000;
  int t_agents = 2, t_layers = 10, t_hidden = 64, t_episode = 200, t_envs = 5;
  uint64_t t_seed = 0;
  double t_lr = 3e-4, t_gamma = 0.99, t_radius = -1.0, t_comm = 1.0,
         t_zeta_scale = 50.0;
  train->add_option("--graph", t_graph, "graph file")->required();
  train->add_option("--out", t_out, "output directory");
  train->add_option("--steps", t_steps, "total environment steps");
  train->add_option("--agents", t_agents, "agent count");
  train->add_option("--layers", t_layers, "GNN depth");
  train->add_option("--hidden", t_hidden, "hidden width");
  train->add_option("--episode-len", t_episode, "episode length");
  train->add_option("--envs", t_envs, "parallel environment copies");
  train->add_option("--seed", t_seed, "seed");
  train->add_option("--lr", t_lr, "learning rate");
  train->add_option("--gamma", t_gamma, "discount factor");
  train->add_option("--obs-radius", t_radius, "observation radius (<0 = unlimited)");
  train->add_option("--comm-success", t_comm, "telemetry delivery probability");
  train->add_option("--zeta-scale", t_zeta_scale, "idleness normalization scale");

  // ---- evaluate ----
  auto* eval = app.add_subcommand("evaluate", "run evaluation sweeps");
  magec::ExperimentConfig ecfg;
  std::string e_config;
  double e_radius = -1.0;
  eval->add_option("--graph", ecfg.graph_file, "graph file")->required();
  eval->add_option("--policy", ecfg.policy, "magec|random|greedy");
  eval->add_option("--checkpoint", ecfg.checkpoint, "actor checkpoint (magec)");
  eval->add_option("--policy-info", ecfg.policy_info, "policy architecture file");
  eval->add_option("--agents", ecfg.n_agents, "agent count");
  eval->add_option("--obs-radius", e_radius, "observation radius (<0 = unlimited)");
  eval->add_option("--comm-success", ecfg.comm_success, "telemetry delivery probability");
  std::string e_attrition;
  eval->add_option("--attrition", e_attrition, "schedule step:agent,step:agent");
  eval->add_option("--horizon", ecfg.horizon, "evaluation steps");
  eval->add_option("--repeat", ecfg.repeat, "independent runs");
  eval->add_option("--seed", ecfg.seed, "base seed");
  eval->add_option("--zeta-scale", ecfg.zeta_scale, "idleness normalization scale");
  eval->add_option("--out", ecfg.out_dir, "output directory");
  eval->add_option("--config", e_config, "key=value config file");
  eval->add_flag("--stochastic-eval", ecfg.stochastic_eval,
                 "sample instead of argmax");

  // ---- compare ----
  auto* comp = app.add_subcommand("compare", "tabulate and plot evaluations");
  std::vector<std::string> c_dirs;
  std::vector<std::string> c_labels;
  std::string c_out = "compare_out";
  std::string c_attrition;
  comp->add_option("--runs", c_dirs, "evaluation output directories")->required();
  comp->add_option("--labels", c_labels, "labels (default: directory names)");
  comp->add_option("--attrition", c_attrition, "marker schedule step:agent,...");
  comp->add_option("--out", c_out, "output directory");

  // ---- graph ----
  auto* graph_cmd = app.add_subcommand("graph", "graph utilities");
  graph_cmd->require_subcommand(1);
  auto* gval = graph_cmd->add_subcommand("validate", "validate a graph file");
  std::string gv_file;
  gval->add_option("file", gv_file, "graph file")->required();
  auto* ggen = graph_cmd->add_subcommand("generate",
                                         "random connected geometric graph");
  magec::GeometricGraphConfig gg;
  std::string gg_out;
  ggen->add_option("--nodes", gg.nodes, "node count");
  ggen->add_option("--seed", gg.seed, "seed");
  ggen->add_option("--area", gg.area, "arena side length, meters");
  ggen->add_option("--radius", gg.connect_radius, "densification radius");
  ggen->add_option("--max-degree", gg.max_degree, "degree cap");
  ggen->add_option("--out", gg_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const double radius = t_radius < 0.0
                                ? std::numeric_limits<double>::infinity()
                                : t_radius;
      return run_train(t_graph, t_out, t_steps, t_agents, t_layers, t_hidden,
                       t_episode, t_envs, t_seed, t_lr, t_gamma, radius, t_comm,
                       t_zeta_scale);
    }
    if (*eval) {
      if (!e_config.empty()) apply_config_file(e_config, ecfg);
      if (eval->count("--obs-radius"))
        ecfg.obs_radius = e_radius < 0.0
                              ? std::numeric_limits<double>::infinity()
                              : e_radius;
      if (eval->count("--attrition"))
        ecfg.attrition = magec::parse_attrition(e_attrition);
      auto out = magec::run_evaluation(ecfg);
      std::cout << "mean time-averaged idleness: "
                << out.mean.time_avg_idleness() << "\n";
      return 0;
    }
    if (*comp) {
      std::vector<magec::MetricsRecord> recs;
      recs.reserve(c_dirs.size());
      for (const auto& dir : c_dirs) {
        // Rebuild the mean series from the persisted per-step CSV.
        std::ifstream in(dir + "/metrics_mean.csv");
        if (!in) throw std::runtime_error("cannot read " + dir + "/metrics_mean.csv");
        std::string line;
        std::getline(in, line);  // header
        magec::MetricsRecord rec;
        while (std::getline(in, line)) {
          double t, avg, worst, sd;
          int living;
          if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%d", &t, &avg, &worst,
                          &sd, &living) != 5)
            throw std::runtime_error("bad metrics row in " + dir);
          rec.avg_idleness.push_back(avg);
          rec.worst_idleness.push_back(worst);
          rec.idleness_std.push_back(sd);
          rec.living_agents.push_back(living);
        }
        recs.push_back(std::move(rec));
      }
      std::vector<std::pair<std::string, const magec::MetricsRecord*>> named;
      for (size_t i = 0; i < recs.size(); ++i) {
        std::string label = i < c_labels.size()
                                ? c_labels[i]
                                : fs::path(c_dirs[i]).filename().string();
        named.push_back({label, &recs[i]});
      }
      std::vector<long> markers;
      for (const auto& [step, agent] : magec::parse_attrition(c_attrition))
        markers.push_back(step);
      auto rows = magec::compare(named, markers, c_out);
      for (const auto& r : rows)
        std::cout << r.label << " " << r.time_avg_idleness << "\n";
      return 0;
    }
    if (*gval) {
      const magec::PatrolGraph g = magec::load_graph(read_file(gv_file));
      const auto view = magec::bidirect(g);
      std::cout << "valid: " << g.num_nodes() << " nodes, " << g.num_edges()
                << " edges, max degree " << view.max_degree << "\n";
      return 0;
    }
    if (*ggen) {
      const magec::PatrolGraph g = magec::generate_geometric_graph(gg);
      const std::string text = magec::write_graph(g);
      if (gg_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(gg_out);
        if (!out) throw std::runtime_error("cannot write " + gg_out);
        out << text;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
