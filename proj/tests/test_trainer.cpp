#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>

#include "magec/trainer.hpp"

using namespace magec;
namespace fs = std::filesystem;

namespace {

const char* kPath4 =
    "nodes 4\n"
    "node 0 0 0\n"
    "node 1 1 0\n"
    "node 2 2 0\n"
    "node 3 3 0\n"
    "edges 3\n"
    "edge 0 1\n"
    "edge 1 2\n"
    "edge 2 3\n";

const char* kLong2 =
    "nodes 2\n"
    "node 0 0 0\n"
    "node 1 3 0\n"
    "edges 1\n"
    "edge 0 1\n";

RolloutEntry entry(int env_id, int agent_id, double value, double reward,
                   int dt) {
  RolloutEntry e;
  e.env_id = env_id;
  e.agent_id = agent_id;
  e.value = value;
  e.cum_reward = reward;
  e.dt = dt;
  return e;
}

ActorConfig small_actor(int max_neighbors) {
  ActorConfig a;
  a.layers = 2;
  a.hidden = 8;
  a.max_neighbors = max_neighbors;
  a.scorer_hidden = 8;
  a.selector_hidden = 8;
  return a;
}

}  // namespace

TEST_CASE("modified gae hand example") {
  RolloutBuffer buf;
  buf.entries.push_back(entry(0, 0, 0.2, 1.0, 2));
  buf.entries.push_back(entry(0, 0, 0.4, 0.5, 3));
  compute_modified_gae(buf, 0.99, 0.95);
  // last step bootstraps zero: A1 = 0.5 - 0.4
  CHECK(buf.entries[1].advantage == Catch::Approx(0.1).margin(1e-12));
  CHECK(buf.entries[1].ret == Catch::Approx(0.5).margin(1e-12));
  // A0 = (1.0 + 0.99^2 * 0.4 - 0.2) + (0.99 * 0.95)^2 * A1
  CHECK(buf.entries[0].advantage ==
        Catch::Approx(1.280494025).margin(1e-9));
  CHECK(buf.entries[0].ret == Catch::Approx(1.480494025).margin(1e-9));
}

TEST_CASE("gae with unit intervals matches the textbook recursion") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int T = 25;
  RolloutBuffer buf;
  std::vector<double> r(T), v(T);
  for (int t = 0; t < T; ++t) {
    r[t] = u(rng);
    v[t] = u(rng);
    buf.entries.push_back(entry(0, 0, v[t], r[t], 1));
  }
  const double gamma = 0.99, lambda = 0.95;
  compute_modified_gae(buf, gamma, lambda);

  double adv_next = 0.0;
  std::vector<double> expect(T);
  for (int t = T - 1; t >= 0; --t) {
    const double v_next = t + 1 < T ? v[t + 1] : 0.0;
    const double delta = r[t] + gamma * v_next - v[t];
    expect[t] = delta + gamma * lambda * adv_next;
    adv_next = expect[t];
  }
  for (int t = 0; t < T; ++t)
    CHECK(buf.entries[t].advantage == Catch::Approx(expect[t]).margin(1e-12));
}

TEST_CASE("gae recursion matches brute-force summation") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> dts(1, 4);
  const int T = 14;
  RolloutBuffer buf;
  for (int t = 0; t < T; ++t)
    buf.entries.push_back(entry(0, 0, u(rng), u(rng), dts(rng)));
  const double gamma = 0.97, lambda = 0.9;
  compute_modified_gae(buf, gamma, lambda);

  // A_t = sum_{l >= t} (gamma*lambda)^{D(t,l)} * delta_l, where D(t,l) is the
  // env-step distance from decision t to decision l.
  for (int t = 0; t < T; ++t) {
    double expect = 0.0;
    long dist = 0;
    for (int l = t; l < T; ++l) {
      const auto& e = buf.entries[l];
      const double v_next = l + 1 < T ? buf.entries[l + 1].value : 0.0;
      const double delta =
          e.cum_reward + std::pow(gamma, e.dt) * v_next - e.value;
      expect += std::pow(gamma * lambda, double(dist)) * delta;
      dist += e.dt;
    }
    CHECK(buf.entries[t].advantage == Catch::Approx(expect).margin(1e-9));
  }
}

TEST_CASE("gae keeps independent streams separate") {
  RolloutBuffer buf;
  // interleaved entries from two agents; each stream is length 2
  buf.entries.push_back(entry(0, 0, 0.0, 1.0, 1));
  buf.entries.push_back(entry(0, 1, 0.0, 5.0, 1));
  buf.entries.push_back(entry(0, 0, 0.0, 1.0, 1));
  buf.entries.push_back(entry(0, 1, 0.0, 5.0, 1));
  compute_modified_gae(buf, 1.0, 1.0);
  CHECK(buf.entries[2].advantage == Catch::Approx(1.0));
  CHECK(buf.entries[0].advantage == Catch::Approx(2.0));
  CHECK(buf.entries[3].advantage == Catch::Approx(5.0));
  CHECK(buf.entries[1].advantage == Catch::Approx(10.0));
}

TEST_CASE("gae rejects an empty buffer") {
  RolloutBuffer buf;
  CHECK_THROWS(compute_modified_gae(buf, 0.99, 0.95));
}

TEST_CASE("rollouts skip synchronously over long edges") {
  PatrolGraph g = load_graph(kLong2);
  EnvConfig ecfg;
  ecfg.n_agents = 1;
  ecfg.episode_len = 8;
  PatrolEnv env(g, ecfg);

  ActorConfig acfg = small_actor(ecfg.max_neighbors);
  ActorParams actor(acfg);
  actor.init(1);
  CriticConfig ccfg;
  ccfg.num_nodes = 2;
  ccfg.hidden = 8;
  ccfg.max_agents = 1;
  CriticParams critic(ccfg);
  critic.init(2);

  TrainConfig cfg;
  cfg.episode_len = 8;
  RolloutBuffer buf;
  std::mt19937_64 rng(3);
  collect_episode(env, 0, 0, actor, critic, cfg, rng, buf);

  // 3-meter edges: decisions at t = 0, 3, 6, with the last window truncated
  REQUIRE(buf.entries.size() == 3);
  CHECK(buf.entries[0].dt == 3);
  CHECK(buf.entries[1].dt == 3);
  CHECK(buf.entries[2].dt == 2);
  int total_dt = 0;
  for (const auto& e : buf.entries) total_dt += e.dt;
  CHECK(total_dt == 8);
  // the only neighbor means the sampled action has probability one
  CHECK(buf.entries[0].log_prob == 0.0);
}

TEST_CASE("rollout reward bookkeeping is consistent") {
  PatrolGraph g = load_graph(kPath4);
  EnvConfig ecfg;
  ecfg.n_agents = 2;
  ecfg.episode_len = 30;
  PatrolEnv env(g, ecfg);

  ActorConfig acfg = small_actor(ecfg.max_neighbors);
  ActorParams actor(acfg);
  actor.init(4);
  CriticConfig ccfg;
  ccfg.num_nodes = 4;
  ccfg.hidden = 8;
  ccfg.max_agents = 2;
  CriticParams critic(ccfg);
  critic.init(5);

  TrainConfig cfg;
  cfg.episode_len = 30;
  cfg.n_envs = 2;
  cfg.seed = 1;
  PatrolEnv env2(g, ecfg);
  RolloutBuffer buf = collect_rollout(env2, actor, critic, cfg, 0);

  double via_entries = 0.0;
  for (const auto& e : buf.entries) via_entries += e.cum_reward;
  CHECK(via_entries == Catch::Approx(buf.total_env_reward).margin(1e-9));
  double via_episodes = 0.0;
  for (double r : buf.episode_reward) via_episodes += r;
  CHECK(via_episodes == Catch::Approx(buf.total_env_reward).margin(1e-9));

  // every agent's decision windows tile the episode exactly
  std::map<std::pair<int, int>, int> dt_sum;
  for (const auto& e : buf.entries) dt_sum[{e.env_id, e.agent_id}] += e.dt;
  for (const auto& [key, total] : dt_sum) CHECK(total == 30);
}

TEST_CASE("rollouts are reproducible") {
  PatrolGraph g = load_graph(kPath4);
  EnvConfig ecfg;
  ecfg.n_agents = 2;
  ecfg.episode_len = 20;
  ActorConfig acfg = small_actor(ecfg.max_neighbors);
  ActorParams actor(acfg);
  actor.init(6);
  CriticConfig ccfg;
  ccfg.num_nodes = 4;
  ccfg.hidden = 8;
  ccfg.max_agents = 2;
  CriticParams critic(ccfg);
  critic.init(7);
  TrainConfig cfg;
  cfg.episode_len = 20;
  cfg.n_envs = 2;
  cfg.seed = 9;

  auto run = [&] {
    PatrolEnv env(g, ecfg);
    RolloutBuffer buf = collect_rollout(env, actor, critic, cfg, 3);
    std::vector<double> trace = {buf.total_env_reward};
    for (const auto& e : buf.entries) {
      trace.push_back(double(e.action));
      trace.push_back(e.log_prob);
      trace.push_back(e.cum_reward);
      trace.push_back(e.value);
    }
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("ppo with zero learning rate is the identity") {
  PatrolGraph g = load_graph(kPath4);
  EnvConfig ecfg;
  ecfg.n_agents = 1;
  ecfg.episode_len = 12;
  PatrolEnv env(g, ecfg);
  ActorConfig acfg = small_actor(ecfg.max_neighbors);
  ActorParams actor(acfg);
  actor.init(10);
  CriticConfig ccfg;
  ccfg.num_nodes = 4;
  ccfg.hidden = 8;
  ccfg.max_agents = 1;
  CriticParams critic(ccfg);
  critic.init(11);

  TrainConfig cfg;
  cfg.episode_len = 12;
  cfg.n_envs = 2;
  cfg.epochs = 2;
  cfg.minibatches = 1;
  cfg.seed = 5;
  RolloutBuffer buf = collect_rollout(env, actor, critic, cfg, 0);
  compute_modified_gae(buf, cfg.gamma, cfg.lambda);

  std::vector<double> before;
  for (Param* p : actor.all())
    before.insert(before.end(), p->value.v.begin(), p->value.v.end());

  Adam opt(AdamConfig{0.0, 0.9, 0.999, 1e-8});
  std::mt19937_64 rng(1);
  UpdateStats stats = ppo_update(buf, actor, critic, opt, cfg, rng);

  std::vector<double> after;
  for (Param* p : actor.all())
    after.insert(after.end(), p->value.v.begin(), p->value.v.end());
  CHECK(before == after);

  // unchanged policy means every ratio is one, so the clipped surrogate
  // reduces to minus the mean normalized advantage, which is about zero
  CHECK(stats.actor_loss == Catch::Approx(0.0).margin(1e-9));
  CHECK(stats.value_loss > 0.0);
  CHECK(stats.entropy >= 0.0);
}

TEST_CASE("ppo survives a single-entry buffer") {
  PatrolGraph g = load_graph(kPath4);
  EnvConfig ecfg;
  ecfg.n_agents = 1;
  ecfg.episode_len = 1;
  PatrolEnv env(g, ecfg);
  ActorConfig acfg = small_actor(ecfg.max_neighbors);
  ActorParams actor(acfg);
  actor.init(12);
  CriticConfig ccfg;
  ccfg.num_nodes = 4;
  ccfg.hidden = 8;
  ccfg.max_agents = 1;
  CriticParams critic(ccfg);
  critic.init(13);

  TrainConfig cfg;
  cfg.episode_len = 1;
  cfg.n_envs = 1;
  cfg.seed = 2;
  RolloutBuffer buf = collect_rollout(env, actor, critic, cfg, 0);
  REQUIRE(buf.entries.size() == 1);
  compute_modified_gae(buf, cfg.gamma, cfg.lambda);

  Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 rng(1);
  CHECK_NOTHROW(ppo_update(buf, actor, critic, opt, cfg, rng));
  for (Param* p : actor.all())
    for (double v : p->value.v) REQUIRE(std::isfinite(v));

  RolloutBuffer empty;
  CHECK_THROWS(ppo_update(empty, actor, critic, opt, cfg, rng));
}

TEST_CASE("training writes checkpoints, metrics, and the policy card") {
  PatrolGraph g = load_graph(kPath4);
  EnvConfig ecfg;
  ecfg.n_agents = 1;
  ActorConfig acfg = small_actor(ecfg.max_neighbors);
  ActorParams actor(acfg);
  actor.init(20);
  CriticConfig ccfg;
  ccfg.num_nodes = 4;
  ccfg.hidden = 8;
  ccfg.max_agents = 1;
  CriticParams critic(ccfg);
  critic.init(21);

  TrainConfig cfg;
  cfg.episode_len = 16;
  cfg.n_envs = 2;
  cfg.total_steps = 64;  // exactly two iterations
  cfg.epochs = 1;
  cfg.minibatches = 2;
  cfg.seed = 3;

  const fs::path dir = fs::temp_directory_path() / "magec_train_test";
  fs::remove_all(dir);
  TrainResult res = train(g, ecfg, acfg, cfg, actor, critic, dir.string());

  REQUIRE(res.curve.size() == 2);
  CHECK(res.curve[0].step == 32);
  CHECK(res.curve[1].step == 64);
  CHECK(fs::exists(dir / "checkpoint_final.txt"));
  CHECK(fs::exists(dir / "critic_final.txt"));
  CHECK(fs::exists(dir / "policy_info.txt"));
  CHECK(fs::exists(dir / "metrics.csv"));

  // the final checkpoint restores the trained actor exactly
  ActorParams restored(acfg);
  load_checkpoint((dir / "checkpoint_final.txt").string(), restored.all());
  for (size_t i = 0; i < actor.conv_w.size(); ++i)
    CHECK(restored.conv_w[i].value.v == actor.conv_w[i].value.v);

  std::ifstream metrics(dir / "metrics.csv");
  std::string header;
  std::getline(metrics, header);
  CHECK(header ==
        "step,mean_episode_reward,eval_avg_idleness,actor_loss,value_loss,"
        "entropy");
  fs::remove_all(dir);
}

TEST_CASE("greedy evaluation is deterministic") {
  PatrolGraph g = load_graph(kPath4);
  EnvConfig ecfg;
  ecfg.n_agents = 1;
  ecfg.episode_len = 20;
  PatrolEnv env(g, ecfg);
  ActorConfig acfg = small_actor(ecfg.max_neighbors);
  ActorParams actor(acfg);
  actor.init(30);
  const double a = greedy_eval_idleness(env, actor, 7);
  const double b = greedy_eval_idleness(env, actor, 7);
  CHECK(a == b);
  CHECK(a > 0.0);
}
