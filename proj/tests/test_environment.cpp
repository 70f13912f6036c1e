#include <catch2/catch_amalgamated.hpp>

#include "magec/environment.hpp"

using namespace magec;

namespace {

// 0 -- 1 -- 2, unit spacing
const char* kPath3 =
    "nodes 3\n"
    "node 0 0 0\n"
    "node 1 1 0\n"
    "node 2 2 0\n"
    "edges 2\n"
    "edge 0 1\n"
    "edge 1 2\n";

// two nodes three meters apart
const char* kLong2 =
    "nodes 2\n"
    "node 0 0 0\n"
    "node 1 3 0\n"
    "edges 1\n"
    "edge 0 1\n";

}  // namespace

TEST_CASE("reset places agents round robin with zero idleness") {
  PatrolGraph g = load_graph(kPath3);
  EnvConfig cfg;
  cfg.n_agents = 2;
  PatrolEnv env(g, cfg);
  env.reset(0);
  const auto& s = env.state();
  CHECK(s.clock == 0);
  CHECK(s.zeta == std::vector<double>{0.0, 0.0, 0.0});
  REQUIRE(s.agents.size() == 2);
  CHECK(s.agents[0].loc.at_node_p());
  CHECK(s.agents[0].loc.node == 0);
  CHECK(s.agents[1].loc.node == 1);
  CHECK(env.living_agents() == std::vector<int>{0, 1});
}

TEST_CASE("more agents than nodes is rejected") {
  PatrolGraph g = load_graph(kLong2);
  EnvConfig cfg;
  cfg.n_agents = 3;
  PatrolEnv env(g, cfg);
  CHECK_THROWS(env.reset(0));
}

TEST_CASE("graph degree above max_neighbors is rejected") {
  PatrolGraph g = load_graph(
      "nodes 4\nnode 0 0 0\nnode 1 1 0\nnode 2 0 1\nnode 3 -1 0\n"
      "edges 3\nedge 0 1\nedge 0 2\nedge 0 3\n");
  EnvConfig cfg;
  cfg.max_neighbors = 2;
  CHECK_THROWS(PatrolEnv(g, cfg));
}

TEST_CASE("single step on a unit path") {
  PatrolGraph g = load_graph(kPath3);
  EnvConfig cfg;
  cfg.n_agents = 1;
  PatrolEnv env(g, cfg);
  env.reset(0);
  // node 0's only neighbor is node 1 -> action 0
  StepResult r = env.step({0});
  const auto& s = env.state();
  CHECK(s.clock == 1);
  CHECK(s.agents[0].loc.at_node_p());
  CHECK(s.agents[0].loc.node == 1);
  REQUIRE(r.arrivals.size() == 1);
  CHECK(r.arrivals[0] == std::pair<int, int>{0, 1});
  CHECK(s.zeta == std::vector<double>{1.0, 0.0, 1.0});
  // pre-reset idleness was all zero, so the visit pays nothing
  CHECK(r.rewards[0] == Catch::Approx(0.0));
}

TEST_CASE("local reward uses pre-reset idleness over pre-reset mean") {
  PatrolGraph g = load_graph(kPath3);
  EnvConfig cfg;
  cfg.n_agents = 1;
  PatrolEnv env(g, cfg);
  env.reset(0);
  env.step({0});  // to node 1; zeta now {1,0,1}
  // node 1's neighbors are {0, 2}; take index 1 -> node 2
  StepResult r = env.step({1});
  const double zbar = 2.0 / 3.0;
  CHECK(r.rewards[0] == Catch::Approx(1.0 / (zbar + 1e-5)));
  CHECK(env.state().zeta == std::vector<double>{2.0, 1.0, 0.0});
}

TEST_CASE("terminal reward lands exactly at episode end") {
  PatrolGraph g = load_graph(kPath3);
  EnvConfig cfg;
  cfg.n_agents = 1;
  cfg.episode_len = 2;
  PatrolEnv env(g, cfg);
  env.reset(0);
  env.step({0});
  StepResult r = env.step({1});
  // local part: zeta(2)=1 over mean 2/3; terminal part: (T-1)/zbar_post,
  // zbar_post = mean({2,1,0}) = 1, weighted by beta = 0.5.
  const double local = 1.0 / (2.0 / 3.0 + 1e-5);
  const double term = 0.5 * 1.0 / (1.0 + 1e-5);
  CHECK(r.rewards[0] == Catch::Approx(local + term));
}

TEST_CASE("long edges take multiple steps") {
  PatrolGraph g = load_graph(kLong2);
  EnvConfig cfg;
  cfg.n_agents = 1;
  PatrolEnv env(g, cfg);
  env.reset(0);
  StepResult r = env.step({0});
  const auto& s = env.state();
  CHECK(r.arrivals.empty());
  CHECK_FALSE(s.agents[0].loc.at_node_p());
  CHECK(s.agents[0].loc.progress == Catch::Approx(1.0 / 3.0));
  CHECK(env.steps_until_next_action() == 2);
  CHECK(env.forced_continue_action(0) == 0);
  CHECK_FALSE(env.any_living_at_node());

  StepResult r2 = env.step({0}, 2);
  CHECK(r2.arrivals.size() == 1);
  CHECK(env.state().agents[0].loc.node == 1);
  CHECK(env.state().clock == 3);
  CHECK(env.state().zeta == std::vector<double>{3.0, 0.0});
}

TEST_CASE("invalid actions are rejected without mutating state") {
  PatrolGraph g = load_graph(kPath3);
  EnvConfig cfg;
  cfg.n_agents = 1;
  PatrolEnv env(g, cfg);
  env.reset(0);
  CHECK_THROWS(env.step({5}));
  CHECK(env.state().clock == 0);
  CHECK_THROWS(env.step({0, 0}));  // wrong arity
  CHECK(env.state().clock == 0);
}

TEST_CASE("idleness either resets or grows by dt") {
  GeometricGraphConfig gg;
  gg.nodes = 9;
  gg.seed = 3;
  PatrolGraph g = generate_geometric_graph(gg);
  EnvConfig cfg;
  cfg.n_agents = 3;
  PatrolEnv env(g, cfg);
  env.reset(11);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 60; ++t) {
    std::vector<int> joint;
    for (int id : env.living_agents()) {
      const auto& a = env.state().agents[id];
      if (a.loc.at_node_p()) {
        std::uniform_int_distribution<int> pick(0, env.view().degree(a.loc.node) - 1);
        joint.push_back(pick(rng));
      } else {
        joint.push_back(env.forced_continue_action(id));
      }
    }
    const std::vector<double> before = env.state().zeta;
    StepResult r = env.step(joint);
    std::vector<char> visited(g.num_nodes(), 0);
    for (const auto& [aid, node] : r.arrivals) visited[node] = 1;
    for (int v = 0; v < g.num_nodes(); ++v) {
      if (visited[v])
        REQUIRE(env.state().zeta[v] == 0.0);
      else
        REQUIRE(env.state().zeta[v] == before[v] + 1.0);
    }
  }
}

TEST_CASE("observation with unlimited radius") {
  PatrolGraph g = load_graph(kPath3);
  EnvConfig cfg;
  cfg.n_agents = 2;
  cfg.max_neighbors = 3;
  PatrolEnv env(g, cfg);
  env.reset(0);
  env.step({0, 1});  // agent0 -> node1, agent1 -> node2
  Observation obs = env.observe(0);

  // patrol nodes first with obs index == node id, then both agents
  REQUIRE(obs.nodes.size() == 5);
  for (int v = 0; v < 3; ++v) {
    CHECK_FALSE(obs.nodes[v].is_agent);
    CHECK(obs.nodes[v].ref_id == v);
    CHECK(obs.nodes[v].raw_zeta == env.state().zeta[v]);
  }
  CHECK(obs.nodes[3].is_agent);
  CHECK(obs.ego == 3);  // agent 0 listed before agent 1
  CHECK(obs.nodes[4].is_agent);
  CHECK(obs.nodes[4].ref_id == 1);

  CHECK(obs.decision_node == 1);
  CHECK(obs.action_neighbors == std::vector<int>{0, 2});
  CHECK(obs.neighbor_dist == std::vector<double>{1.0, 1.0});
  CHECK(obs.mask == std::vector<bool>{true, true, false});

  // node features: [patrol one-hot, agent one-hot, zeta/scale, deg/max_n]
  CHECK(obs.nodes[0].feat ==
        std::vector<double>{1.0, 0.0, 1.0 / cfg.zeta_scale, 1.0 / 3.0});
  CHECK(obs.nodes[3].feat[0] == 0.0);
  CHECK(obs.nodes[3].feat[1] == 1.0);

  // every edge carries a distance and a one-hot neighbor index
  for (const auto& e : obs.edges) {
    REQUIRE(e.feat.size() == size_t(1 + cfg.max_neighbors));
    double hot = 0.0;
    for (int j = 1; j < 1 + cfg.max_neighbors; ++j) hot += e.feat[j];
    CHECK(hot == 1.0);
  }
}

TEST_CASE("agents on edges get a single forced action") {
  PatrolGraph g = load_graph(kLong2);
  EnvConfig cfg;
  cfg.n_agents = 1;
  PatrolEnv env(g, cfg);
  env.reset(0);
  env.step({0});
  Observation obs = env.observe(0);
  CHECK(obs.decision_node == 0);
  CHECK(obs.num_actions() == 1);
  CHECK(obs.mask[env.forced_continue_action(0)]);
  // the traversing agent hangs off both endpoints at interpolated distances
  int agent_edges = 0;
  for (const auto& e : obs.edges)
    if (e.src == obs.ego || e.dst == obs.ego) ++agent_edges;
  CHECK(agent_edges == 4);
}

TEST_CASE("beliefs go stale outside the radius and refresh via telemetry") {
  PatrolGraph g = load_graph(kPath3);
  EnvConfig cfg;
  cfg.n_agents = 2;
  cfg.obs_radius = 0.5;

  SECTION("no communication: extrapolated idleness diverges from truth") {
    cfg.comm_success = 0.0;
    PatrolEnv env(g, cfg);
    env.reset(0);
    env.step({0, 1});  // agent0 -> node1, agent1 -> node2 (resets zeta[2])
    Observation obs = env.observe(0);
    CHECK(obs.nodes[1].raw_zeta == 0.0);  // in radius: exact
    CHECK(obs.nodes[0].raw_zeta == 1.0);  // stale but happens to match truth
    CHECK(obs.nodes[2].raw_zeta == 1.0);  // stale; truth is 0
    CHECK(env.state().zeta[2] == 0.0);
  }
  SECTION("perfect telemetry delivers the fresh reading") {
    cfg.comm_success = 1.0;
    PatrolEnv env(g, cfg);
    env.reset(0);
    env.step({0, 1});
    Observation obs = env.observe(0);
    CHECK(obs.nodes[2].raw_zeta == 0.0);  // learned from agent 1's broadcast
  }
}

TEST_CASE("attrition is silent") {
  PatrolGraph g = load_graph(kPath3);
  EnvConfig cfg;
  cfg.n_agents = 2;
  cfg.obs_radius = 0.5;
  cfg.comm_success = 1.0;
  cfg.agent_belief_ttl = 3;
  PatrolEnv env(g, cfg);
  env.reset(0);
  env.step({0, 1});
  env.apply_attrition(1);
  CHECK(env.living_agents() == std::vector<int>{0});
  CHECK_THROWS(env.observe(1));
  CHECK_THROWS(env.apply_attrition(1));

  // the survivor still believes agent 1 exists until the report ages out
  Observation obs = env.observe(0);
  int agent_nodes = 0;
  for (const auto& n : obs.nodes) agent_nodes += n.is_agent;
  CHECK(agent_nodes == 2);
  // march in place long enough for the belief to expire
  for (int t = 0; t < 4; ++t) {
    const auto& a = env.state().agents[0];
    env.step({a.loc.at_node_p() ? 0 : env.forced_continue_action(0)});
  }
  Observation obs2 = env.observe(0);
  agent_nodes = 0;
  for (const auto& n : obs2.nodes) agent_nodes += n.is_agent;
  CHECK(agent_nodes == 1);
}

TEST_CASE("identical seeds give identical trajectories and beliefs") {
  GeometricGraphConfig gg;
  gg.nodes = 8;
  gg.seed = 21;
  PatrolGraph g = generate_geometric_graph(gg);
  EnvConfig cfg;
  cfg.n_agents = 3;
  cfg.obs_radius = 15.0;
  cfg.comm_success = 0.5;

  auto run = [&] {
    PatrolEnv env(g, cfg);
    env.reset(99);
    std::mt19937_64 rng(7);
    std::vector<double> trace;
    for (int t = 0; t < 40; ++t) {
      std::vector<int> joint;
      for (int id : env.living_agents()) {
        const auto& a = env.state().agents[id];
        if (a.loc.at_node_p()) {
          std::uniform_int_distribution<int> pick(
              0, env.view().degree(a.loc.node) - 1);
          joint.push_back(pick(rng));
        } else {
          joint.push_back(env.forced_continue_action(id));
        }
      }
      StepResult r = env.step(joint);
      for (double x : r.rewards) trace.push_back(x);
      Observation obs = env.observe(0);
      for (const auto& n : obs.nodes) trace.push_back(n.raw_zeta);
    }
    return trace;
  };
  CHECK(run() == run());
}
