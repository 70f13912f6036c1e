#ifndef MAGEC_CRITIC_HPP_
#define MAGEC_CRITIC_HPP_

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "magec/environment.hpp"
#include "magec/tensor.hpp"

namespace magec {

/// Omniscient training-time value function. Input is feature-engineered
/// global state for a fixed graph size and maximum agent count; the network
/// is a plain MLP and is never consulted at execution time.
struct CriticConfig {
  int num_nodes = 0;
  int max_agents = 4;
  int hidden = 128;

  int input_dim() const {
    // idleness (m) + adjacency (m^2) + per agent: current/destination
    // one-hots (2m) + progress + alive flag.
    return num_nodes + num_nodes * num_nodes +
           max_agents * (2 * num_nodes + 2);
  }
};

struct CriticParams {
  CriticConfig cfg;
  std::vector<Param> layers;  // w1 b1 w2 b2 w3 b3

  explicit CriticParams(CriticConfig c) : cfg(c) {
    if (cfg.num_nodes < 1) throw std::runtime_error("critic needs a graph size");
    layers.emplace_back("critic.w1", cfg.input_dim(), cfg.hidden);
    layers.emplace_back("critic.b1", 1, cfg.hidden);
    layers.emplace_back("critic.w2", cfg.hidden, cfg.hidden);
    layers.emplace_back("critic.b2", 1, cfg.hidden);
    layers.emplace_back("critic.w3", cfg.hidden, 1);
    layers.emplace_back("critic.b3", 1, 1);
  }

  void init(uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto* p : all()) xavier_init(*p, rng);
  }

  std::vector<Param*> all() {
    std::vector<Param*> ps;
    for (auto& p : layers) ps.push_back(&p);
    return ps;
  }
};

inline std::vector<double> build_critic_features(const WorldState& s,
                                                 const CriticConfig& cfg,
                                                 double zeta_scale) {
  const int m = cfg.num_nodes;
  if (s.graph->num_nodes() != m)
    throw std::runtime_error("critic was sized for a different graph");
  if (static_cast<int>(s.agents.size()) > cfg.max_agents)
    throw std::runtime_error("agent count exceeds critic capacity");

  std::vector<double> f;
  f.reserve(cfg.input_dim());
  for (int v = 0; v < m; ++v)
    f.push_back(std::min(s.zeta[v] / zeta_scale, 1.0));
  const double max_w = max_edge_weight(*s.graph);
  std::vector<double> adj(size_t(m) * m, 0.0);
  for (const auto& e : s.graph->edges) {
    adj[size_t(e.a) * m + e.b] = e.weight / max_w;
    adj[size_t(e.b) * m + e.a] = e.weight / max_w;
  }
  f.insert(f.end(), adj.begin(), adj.end());
  for (int i = 0; i < cfg.max_agents; ++i) {
    std::vector<double> block(2 * m + 2, 0.0);
    if (i < static_cast<int>(s.agents.size())) {
      const auto& a = s.agents[i];
      if (a.alive) {
        if (a.loc.at_node_p()) {
          block[a.loc.node] = 1.0;
          block[m + a.loc.node] = 1.0;
        } else {
          block[a.loc.from] = 1.0;
          block[m + a.loc.to] = 1.0;
          block[2 * m] = a.loc.progress;
        }
        block[2 * m + 1] = 1.0;
      }
    }
    f.insert(f.end(), block.begin(), block.end());
  }
  return f;
}

inline Tensor critic_value(Tape& tape, const std::vector<double>& features,
                           CriticParams& params) {
  if (static_cast<int>(features.size()) != params.cfg.input_dim())
    throw std::runtime_error("critic feature length mismatch");
  Tensor x = tape.constant(Mat::row(features));
  Tensor h1 = tape.relu(tape.add(tape.matmul(x, tape.param(params.layers[0])),
                                 tape.param(params.layers[1])));
  Tensor h2 = tape.relu(tape.add(tape.matmul(h1, tape.param(params.layers[2])),
                                 tape.param(params.layers[3])));
  return tape.add(tape.matmul(h2, tape.param(params.layers[4])),
                  tape.param(params.layers[5]));
}

inline double critic_value_of(const std::vector<double>& features,
                              CriticParams& params) {
  Tape tape;
  return critic_value(tape, features, params).val()(0, 0);
}

}  // namespace magec

#endif  // MAGEC_CRITIC_HPP_
