#ifndef MAGEC_ENVIRONMENT_HPP_
#define MAGEC_ENVIRONMENT_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "magec/patrol_graph.hpp"

namespace magec {

struct Location {
  enum class Kind { AtNode, OnEdge };
  Kind kind = Kind::AtNode;
  int node = 0;             // AtNode
  int from = 0, to = 0;     // OnEdge
  double progress = 0.0;    // fraction of the edge already traversed

  static Location at_node(int v) { return {Kind::AtNode, v, 0, 0, 0.0}; }
  static Location on_edge(int from, int to, double progress) {
    return {Kind::OnEdge, 0, from, to, progress};
  }
  bool at_node_p() const { return kind == Kind::AtNode; }
};

struct AgentState {
  int id = 0;
  bool alive = true;
  Location loc;
};

struct WorldState {
  const PatrolGraph* graph = nullptr;
  const BidirectedView* view = nullptr;
  long clock = 0;
  std::vector<double> zeta;        // per-node idleness, time units
  std::vector<AgentState> agents;
  std::mt19937_64 rng;             // drives communication loss only
};

inline Vec2 agent_position(const WorldState& s, const AgentState& a) {
  if (a.loc.at_node_p()) return s.graph->positions[a.loc.node];
  const Vec2& p = s.graph->positions[a.loc.from];
  const Vec2& q = s.graph->positions[a.loc.to];
  const double t = a.loc.progress;
  return {p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t};
}

inline double average_idleness(const WorldState& s) {
  double sum = 0.0;
  for (double z : s.zeta) sum += z;
  return sum / s.zeta.size();
}

inline double worst_idleness(const WorldState& s) {
  return *std::max_element(s.zeta.begin(), s.zeta.end());
}

inline double idleness_std(const WorldState& s) {
  const double mean = average_idleness(s);
  double acc = 0.0;
  for (double z : s.zeta) acc += (z - mean) * (z - mean);
  return std::sqrt(acc / s.zeta.size());
}

struct NodeBelief {
  double zeta = 0.0;
  long ts = 0;
};

struct AgentBelief {
  Location loc;
  long ts = 0;
  bool known = false;
};

/// What one agent knows: last-known idleness per node and last-known
/// location per agent, each stamped with the time it was learned. Idleness
/// is extrapolated as zeta + (now - ts) when read.
struct BeliefState {
  int owner = 0;
  std::vector<NodeBelief> nodes;
  std::vector<AgentBelief> agents;
};

struct DisturbanceSchedule {
  std::vector<std::pair<long, int>> attrition;  // (step, agent id)
  double comm_success = 1.0;
  int telemetry_period = 1;
};

struct EnvConfig {
  int n_agents = 2;
  double obs_radius = std::numeric_limits<double>::infinity();
  double comm_success = 1.0;
  int telemetry_period = 1;
  double zeta_scale = 50.0;
  int episode_len = 200;
  double alpha = 1.0;
  double beta = 0.5;
  double reward_eps = 1e-5;
  int max_neighbors = 10;
  // A believed (not directly seen) agent drops out of observations once its
  // location report is older than this.
  long agent_belief_ttl = 50;
};

struct ObsNode {
  bool is_agent = false;
  int ref_id = 0;                // patrol node id or agent id
  std::vector<double> feat;      // [type one-hot(2), zeta_norm, degree_norm]
  double raw_zeta = 0.0;         // believed idleness, time units (patrol nodes)
};

struct ObsEdge {
  int src = 0;
  int dst = 0;
  std::vector<double> feat;  // [distance_norm, neighbor-index one-hot]
};

/// A per-agent local feature graph: all patrol nodes (exact inside the
/// observation radius, belief-extrapolated outside) plus observed/believed
/// agents inserted as agent-type nodes.
struct Observation {
  std::vector<ObsNode> nodes;
  std::vector<ObsEdge> edges;    // directed
  int ego = -1;                  // obs index of the observing agent's node
  int decision_node = -1;        // obs index of the node whose edges are actions
  std::vector<int> action_neighbors;  // obs node indices, neighbor-index order
  std::vector<double> neighbor_zeta;  // believed idleness of each action target
  std::vector<double> neighbor_dist;  // edge length to each action target, m
  std::vector<bool> mask;             // length max_neighbors
  int max_neighbors = 0;

  int num_actions() const {
    return static_cast<int>(
        std::count(mask.begin(), mask.end(), true));
  }
};

struct StepResult {
  std::vector<double> rewards;              // per living agent, ascending id
  std::vector<std::pair<int, int>> arrivals;  // (agent id, node id)
};

inline int node_feat_dim() { return 4; }
inline int edge_feat_dim(int max_neighbors) { return 1 + max_neighbors; }

class PatrolEnv {
 public:
  PatrolEnv(const PatrolGraph& graph, EnvConfig cfg)
      : graph_(&graph), view_(bidirect(graph)), cfg_(cfg) {
    if (view_.max_degree > cfg_.max_neighbors)
      throw std::runtime_error("graph max degree exceeds max_neighbors");
    max_w_ = max_edge_weight(graph);
  }

  const EnvConfig& config() const { return cfg_; }
  const PatrolGraph& graph() const { return *graph_; }
  const BidirectedView& view() const { return view_; }
  const WorldState& state() const { return state_; }
  const std::vector<BeliefState>& beliefs() const { return beliefs_; }

  void reset(uint64_t seed) {
    const int m = graph_->num_nodes();
    if (cfg_.n_agents < 1) throw std::runtime_error("need at least one agent");
    if (cfg_.n_agents > m)
      throw std::runtime_error("more agents than nodes: " +
                               std::to_string(cfg_.n_agents) + " > " +
                               std::to_string(m));
    state_.graph = graph_;
    state_.view = &view_;
    state_.clock = 0;
    state_.zeta.assign(m, 0.0);
    state_.rng.seed(seed);
    state_.agents.clear();
    for (int i = 0; i < cfg_.n_agents; ++i)
      state_.agents.push_back({i, true, Location::at_node(i % m)});

    // Every agent starts with ground truth at t=0: the topology and initial
    // placements are common knowledge.
    beliefs_.assign(cfg_.n_agents, {});
    for (int i = 0; i < cfg_.n_agents; ++i) {
      beliefs_[i].owner = i;
      beliefs_[i].nodes.assign(m, {0.0, 0});
      beliefs_[i].agents.assign(cfg_.n_agents, {});
      for (int j = 0; j < cfg_.n_agents; ++j)
        beliefs_[i].agents[j] = {state_.agents[j].loc, 0, true};
    }
  }

  std::vector<int> living_agents() const {
    std::vector<int> ids;
    for (const auto& a : state_.agents)
      if (a.alive) ids.push_back(a.id);
    return ids;
  }

  /// For an agent already traversing an edge, the only legal action.
  int forced_continue_action(int agent_id) const {
    const auto& a = state_.agents[agent_id];
    if (a.loc.at_node_p())
      throw std::runtime_error("agent is at a node; action is free");
    return view_.neighbor_index(a.loc.from, a.loc.to);
  }

  /// Advances the world by one step. `joint_action` has one entry per living
  /// agent in ascending id order; entries for agents already on an edge must
  /// equal the forced continue index.
  StepResult step(const std::vector<int>& joint_action, int dt = 1) {
    auto living = living_agents();
    if (joint_action.size() != living.size())
      throw std::runtime_error("joint action size != living agent count");

    // Validate everything before mutating.
    for (size_t k = 0; k < living.size(); ++k) {
      const auto& a = state_.agents[living[k]];
      const int act = joint_action[k];
      if (a.loc.at_node_p()) {
        if (act < 0 || act >= view_.degree(a.loc.node))
          throw std::runtime_error(
              "invalid action " + std::to_string(act) + " for agent " +
              std::to_string(a.id) + " at node " + std::to_string(a.loc.node));
      } else {
        if (act != view_.neighbor_index(a.loc.from, a.loc.to))
          throw std::runtime_error("agent " + std::to_string(a.id) +
                                   " on an edge must take the continue action");
      }
    }

    StepResult res;
    res.rewards.assign(living.size(), 0.0);

    // Commit new traversals, then advance everyone.
    for (size_t k = 0; k < living.size(); ++k) {
      auto& a = state_.agents[living[k]];
      if (a.loc.at_node_p()) {
        const int dest = view_.neighbors[a.loc.node][joint_action[k]];
        a.loc = Location::on_edge(a.loc.node, dest, 0.0);
      }
    }
    std::vector<char> visited(graph_->num_nodes(), 0);
    for (size_t k = 0; k < living.size(); ++k) {
      auto& a = state_.agents[living[k]];
      const double w = view_.weight_between(a.loc.from, a.loc.to);
      a.loc.progress += double(dt) / w;  // unit speed: 1 m per step
      if (a.loc.progress >= 1.0 - 1e-12) {
        const int dest = a.loc.to;
        a.loc = Location::at_node(dest);
        visited[dest] = 1;
        res.arrivals.push_back({a.id, dest});
      }
    }

    // Local rewards use pre-reset idleness for both numerator and mean.
    const double zbar = average_idleness(state_);
    for (size_t k = 0; k < living.size(); ++k) {
      for (const auto& [aid, node] : res.arrivals)
        if (aid == living[k])
          res.rewards[k] +=
              cfg_.alpha * state_.zeta[node] / (zbar + cfg_.reward_eps);
    }

    for (int v = 0; v < graph_->num_nodes(); ++v) {
      if (visited[v])
        state_.zeta[v] = 0.0;
      else
        state_.zeta[v] += dt;
    }
    state_.clock += dt;

    if (state_.clock == cfg_.episode_len) {
      const double term = double(cfg_.episode_len - 1) /
                          (average_idleness(state_) + cfg_.reward_eps);
      for (auto& r : res.rewards) r += cfg_.beta * term;
    }

    // Each agent's own senses always reach its own belief.
    for (int id : living) self_observe(id);

    if (cfg_.telemetry_period > 0 && state_.clock % cfg_.telemetry_period == 0)
      broadcast_and_merge();

    return res;
  }

  /// One telemetry exchange: every ordered (sender, receiver) pair of living
  /// agents succeeds independently with probability comm_success; on success
  /// the receiver keeps whichever entry has the newer timestamp.
  void broadcast_and_merge() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& s : state_.agents) {
      if (!s.alive) continue;
      for (const auto& r : state_.agents) {
        if (!r.alive || r.id == s.id) continue;
        const double draw = u(state_.rng);
        if (draw >= cfg_.comm_success) continue;
        auto& rb = beliefs_[r.id];
        const auto& sb = beliefs_[s.id];
        for (size_t v = 0; v < rb.nodes.size(); ++v)
          if (sb.nodes[v].ts > rb.nodes[v].ts) rb.nodes[v] = sb.nodes[v];
        for (size_t j = 0; j < rb.agents.size(); ++j)
          if (sb.agents[j].known &&
              (!rb.agents[j].known || sb.agents[j].ts > rb.agents[j].ts))
            rb.agents[j] = sb.agents[j];
      }
    }
  }

  void apply_attrition(int agent_id) {
    if (agent_id < 0 || agent_id >= static_cast<int>(state_.agents.size()))
      throw std::runtime_error("unknown agent " + std::to_string(agent_id));
    auto& a = state_.agents[agent_id];
    if (!a.alive)
      throw std::runtime_error("agent " + std::to_string(agent_id) +
                               " is already dead");
    // No notification is sent; survivors must notice via belief staleness.
    a.alive = false;
  }

  Observation observe(int agent_id) const {
    if (agent_id < 0 || agent_id >= static_cast<int>(state_.agents.size()))
      throw std::runtime_error("unknown agent " + std::to_string(agent_id));
    const auto& self = state_.agents[agent_id];
    if (!self.alive)
      throw std::runtime_error("agent " + std::to_string(agent_id) + " is dead");
    const Vec2 self_pos = agent_position(state_, self);
    const int m = graph_->num_nodes();
    const long now = state_.clock;
    const auto& bel = beliefs_[agent_id];

    Observation obs;
    obs.max_neighbors = cfg_.max_neighbors;

    // Patrol nodes first (obs index == node id): exact idleness inside the
    // radius, belief extrapolation outside.
    for (int v = 0; v < m; ++v) {
      ObsNode n;
      n.is_agent = false;
      n.ref_id = v;
      const double d = euclidean_distance(self_pos, graph_->positions[v]);
      if (d <= cfg_.obs_radius)
        n.raw_zeta = state_.zeta[v];
      else
        n.raw_zeta = bel.nodes[v].zeta + double(now - bel.nodes[v].ts);
      obs.nodes.push_back(std::move(n));
    }

    // Agents: self always from ground truth; others if in radius (and alive)
    // or recently reported.
    struct AgentEntry {
      int id;
      Location loc;
    };
    std::vector<AgentEntry> ents;
    for (const auto& other : state_.agents) {
      if (other.id == agent_id) {
        ents.push_back({other.id, other.loc});
        continue;
      }
      if (other.alive &&
          euclidean_distance(self_pos, agent_position(state_, other)) <=
              cfg_.obs_radius) {
        ents.push_back({other.id, other.loc});
      } else if (bel.agents[other.id].known &&
                 now - bel.agents[other.id].ts <= cfg_.agent_belief_ttl) {
        ents.push_back({other.id, bel.agents[other.id].loc});
      }
    }

    std::vector<std::tuple<int, int, double>> raw_edges;  // src, dst, length
    for (const auto& e : graph_->edges) {
      raw_edges.emplace_back(e.a, e.b, e.weight);
      raw_edges.emplace_back(e.b, e.a, e.weight);
    }
    int ego_idx = -1;
    for (const auto& ent : ents) {
      const int idx = static_cast<int>(obs.nodes.size());
      if (ent.id == agent_id) ego_idx = idx;
      ObsNode n;
      n.is_agent = true;
      n.ref_id = ent.id;
      obs.nodes.push_back(std::move(n));
      if (ent.loc.at_node_p()) {
        raw_edges.emplace_back(idx, ent.loc.node, 0.0);
        raw_edges.emplace_back(ent.loc.node, idx, 0.0);
      } else {
        const double w = view_.weight_between(ent.loc.from, ent.loc.to);
        const double back = ent.loc.progress * w;
        const double ahead = (1.0 - ent.loc.progress) * w;
        raw_edges.emplace_back(idx, ent.loc.from, back);
        raw_edges.emplace_back(ent.loc.from, idx, back);
        raw_edges.emplace_back(idx, ent.loc.to, ahead);
        raw_edges.emplace_back(ent.loc.to, idx, ahead);
      }
    }
    obs.ego = ego_idx;

    // Bidirect the observation graph: per-node neighbor lists sorted by obs
    // index. Patrol ids precede agent ids, so a patrol node's patrol
    // neighbors keep exactly the indices of the full-graph view.
    const int n_obs = static_cast<int>(obs.nodes.size());
    std::vector<std::vector<std::pair<int, double>>> in_nb(n_obs);
    for (const auto& [src, dst, len] : raw_edges)
      in_nb[dst].push_back({src, len});
    for (auto& nb : in_nb) std::sort(nb.begin(), nb.end());

    const int fe = edge_feat_dim(cfg_.max_neighbors);
    for (int dst = 0; dst < n_obs; ++dst) {
      for (size_t i = 0; i < in_nb[dst].size(); ++i) {
        ObsEdge e;
        e.src = in_nb[dst][i].first;
        e.dst = dst;
        e.feat.assign(fe, 0.0);
        e.feat[0] = max_w_ > 0.0 ? in_nb[dst][i].second / max_w_ : 0.0;
        if (static_cast<int>(i) < cfg_.max_neighbors)
          e.feat[1 + i] = 1.0;  // identifier: src's index within dst's list
        obs.edges.push_back(std::move(e));
      }
    }

    // Node features.
    for (int i = 0; i < n_obs; ++i) {
      auto& n = obs.nodes[i];
      const double deg =
          n.is_agent ? double(in_nb[i].size()) : double(view_.degree(n.ref_id));
      n.feat = {n.is_agent ? 0.0 : 1.0, n.is_agent ? 1.0 : 0.0,
                std::min(n.raw_zeta / cfg_.zeta_scale, 1.0),
                std::min(deg / cfg_.max_neighbors, 1.0)};
    }

    // Decision node, action targets, mask.
    const int decision =
        self.loc.at_node_p() ? self.loc.node : self.loc.from;
    obs.decision_node = decision;
    obs.mask.assign(cfg_.max_neighbors, false);
    const auto& nbrs = view_.neighbors[decision];
    for (size_t i = 0; i < nbrs.size(); ++i) {
      obs.action_neighbors.push_back(nbrs[i]);
      obs.neighbor_zeta.push_back(obs.nodes[nbrs[i]].raw_zeta);
      obs.neighbor_dist.push_back(view_.edge_weight[decision][i]);
    }
    if (self.loc.at_node_p()) {
      for (size_t i = 0; i < nbrs.size(); ++i) obs.mask[i] = true;
    } else {
      obs.mask[view_.neighbor_index(decision, self.loc.to)] = true;
    }
    return obs;
  }

  /// Minimum whole steps before any living agent reaches a node. All living
  /// agents must already be traversing an edge.
  int steps_until_next_action() const {
    int best = std::numeric_limits<int>::max();
    bool any = false;
    for (const auto& a : state_.agents) {
      if (!a.alive) continue;
      any = true;
      if (a.loc.at_node_p())
        throw std::runtime_error("agent " + std::to_string(a.id) +
                                 " has no committed motion");
      const double w = view_.weight_between(a.loc.from, a.loc.to);
      const double remaining = (1.0 - a.loc.progress) * w;
      best = std::min(best, std::max(1, int(std::ceil(remaining - 1e-9))));
    }
    if (!any) throw std::runtime_error("no living agents");
    return best;
  }

  bool any_living_at_node() const {
    for (const auto& a : state_.agents)
      if (a.alive && a.loc.at_node_p()) return true;
    return false;
  }

  double max_edge_w() const { return max_w_; }

 private:
  void self_observe(int agent_id) {
    auto& a = state_.agents[agent_id];
    auto& bel = beliefs_[agent_id];
    const Vec2 pos = agent_position(state_, a);
    for (int v = 0; v < graph_->num_nodes(); ++v)
      if (euclidean_distance(pos, graph_->positions[v]) <= cfg_.obs_radius)
        bel.nodes[v] = {state_.zeta[v], state_.clock};
    bel.agents[agent_id] = {a.loc, state_.clock, true};
    // Agents in visual range are sensed directly, not just via telemetry.
    for (const auto& other : state_.agents) {
      if (other.id == agent_id || !other.alive) continue;
      if (euclidean_distance(pos, agent_position(state_, other)) <=
          cfg_.obs_radius)
        bel.agents[other.id] = {other.loc, state_.clock, true};
    }
  }

  const PatrolGraph* graph_;
  BidirectedView view_;
  EnvConfig cfg_;
  double max_w_ = 0.0;
  WorldState state_;
  std::vector<BeliefState> beliefs_;
};

}  // namespace magec

#endif  // MAGEC_ENVIRONMENT_HPP_
