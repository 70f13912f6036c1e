#ifndef MAGEC_TRAINER_HPP_
#define MAGEC_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "magec/actor.hpp"
#include "magec/critic.hpp"
#include "magec/environment.hpp"

namespace magec {

struct TrainConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_ratio = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int epochs = 4;
  int minibatches = 4;
  int n_envs = 5;
  int episode_len = 200;
  long total_steps = 100000;
  double lr = 3e-4;
  double max_grad_norm = 0.5;
  uint64_t seed = 0;
  int checkpoint_every = 20;  // iterations
};

/// One decision-step record for one agent. Rewards paid during the skipped
/// window are summed into cum_reward; dt is the window length in env steps.
struct RolloutEntry {
  int env_id = 0;
  int agent_id = 0;
  Observation obs;
  std::vector<double> critic_feat;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double cum_reward = 0.0;
  int dt = 1;
  bool alive = true;
  double advantage = 0.0;
  double ret = 0.0;
};

struct RolloutBuffer {
  std::vector<RolloutEntry> entries;
  std::vector<double> episode_reward;  // per env, summed over agents and steps
  double total_env_reward = 0.0;       // sum of every per-step reward paid
};

/// Plays one full episode on `env`, sampling the shared policy at decision
/// steps and skipping synchronously while every living agent is mid-edge.
inline void collect_episode(PatrolEnv& env, uint64_t env_seed, int env_id,
                            ActorParams& actor, CriticParams& critic,
                            const TrainConfig& cfg, std::mt19937_64& policy_rng,
                            RolloutBuffer& buffer) {
  env.reset(env_seed);
  const int T = env.config().episode_len;
  double episode_total = 0.0;

  while (env.state().clock < T) {
    const auto living = env.living_agents();
    const auto critic_feat =
        build_critic_features(env.state(), critic.cfg, env.config().zeta_scale);
    const double value = critic_value_of(critic_feat, critic);

    std::vector<int> actions(living.size());
    const size_t first_entry = buffer.entries.size();
    for (size_t k = 0; k < living.size(); ++k) {
      RolloutEntry e;
      e.env_id = env_id;
      e.agent_id = living[k];
      e.obs = env.observe(living[k]);
      e.critic_feat = critic_feat;
      e.value = value;
      const auto& loc = env.state().agents[living[k]].loc;
      if (loc.at_node_p()) {
        Tape tape;
        Tensor logp = policy_log_probs(tape, e.obs, actor);
        e.action = sample_action(logp.val(), e.obs.mask, policy_rng, &e.log_prob);
      } else {
        // Forced continue: single unmasked action, log-prob exactly 0.
        e.action = env.forced_continue_action(living[k]);
        e.log_prob = 0.0;
      }
      actions[k] = e.action;
      buffer.entries.push_back(std::move(e));
    }

    int dt = 0;
    std::vector<double> cum(living.size(), 0.0);
    bool first = true;
    do {
      std::vector<int> acts;
      if (first) {
        acts = actions;
      } else {
        for (int id : living) acts.push_back(env.forced_continue_action(id));
      }
      StepResult sr = env.step(acts);
      for (size_t k = 0; k < living.size(); ++k) {
        cum[k] += sr.rewards[k];
        buffer.total_env_reward += sr.rewards[k];
        episode_total += sr.rewards[k];
      }
      ++dt;
      first = false;
    } while (env.state().clock < T && !env.any_living_at_node());

    for (size_t k = 0; k < living.size(); ++k) {
      buffer.entries[first_entry + k].cum_reward = cum[k];
      buffer.entries[first_entry + k].dt = dt;
    }
  }
  buffer.episode_reward.push_back(episode_total);
}

inline RolloutBuffer collect_rollout(PatrolEnv& env, ActorParams& actor,
                                     CriticParams& critic,
                                     const TrainConfig& cfg, int iteration) {
  RolloutBuffer buffer;
  std::mt19937_64 policy_rng(cfg.seed ^ (0x9e3779b97f4a7c15ull * (iteration + 1)));
  for (int e = 0; e < cfg.n_envs; ++e) {
    const uint64_t env_seed =
        cfg.seed + 7919ull * uint64_t(iteration) + 104729ull * uint64_t(e);
    collect_episode(env, env_seed, e, actor, critic, cfg, policy_rng, buffer);
  }
  return buffer;
}

/// GAE with per-interval discounting: delta(t) = R + gamma^dt V(t+1) - V(t),
/// accumulated backward with factor (gamma*lambda)^dt. With dt == 1
/// everywhere this is textbook GAE.
inline void compute_modified_gae(RolloutBuffer& buffer, double gamma,
                                 double lambda) {
  if (buffer.entries.empty())
    throw std::runtime_error("compute_modified_gae: empty buffer");
  // Entries were appended chronologically; walk each (env, agent) sequence
  // backwards with terminal bootstrap 0.
  std::vector<std::pair<long, size_t>> keyed;
  for (size_t i = 0; i < buffer.entries.size(); ++i) {
    const auto& e = buffer.entries[i];
    keyed.push_back({long(e.env_id) * 1000000 + e.agent_id, i});
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  size_t i = 0;
  while (i < keyed.size()) {
    size_t j = i;
    while (j < keyed.size() && keyed[j].first == keyed[i].first) ++j;
    double adv_next = 0.0;
    double v_next = 0.0;
    for (size_t k = j; k-- > i;) {
      auto& e = buffer.entries[keyed[k].second];
      const double delta =
          e.cum_reward + std::pow(gamma, e.dt) * v_next - e.value;
      const double adv = delta + std::pow(gamma * lambda, e.dt) * adv_next;
      e.advantage = adv;
      e.ret = adv + e.value;
      adv_next = adv;
      v_next = e.value;
    }
    i = j;
  }
}

struct UpdateStats {
  double actor_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

namespace detail {

inline void clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (Param* p : params)
    for (double g : p->grad.v) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Param* p : params)
      for (double& g : p->grad.v) g *= s;
  }
}

}  // namespace detail

/// Clipped-surrogate PPO pass over the whole buffer: advantages normalized
/// per batch, epochs x minibatches sweeps, shared Adam over actor and critic.
inline UpdateStats ppo_update(RolloutBuffer& buffer, ActorParams& actor,
                              CriticParams& critic, Adam& opt,
                              const TrainConfig& cfg, std::mt19937_64& rng) {
  auto& entries = buffer.entries;
  if (entries.empty()) throw std::runtime_error("ppo_update: empty buffer");

  double mean = 0.0;
  for (const auto& e : entries) mean += e.advantage;
  mean /= entries.size();
  double var = 0.0;
  for (const auto& e : entries) var += (e.advantage - mean) * (e.advantage - mean);
  const double std = std::sqrt(var / entries.size()) + 1e-8;
  std::vector<double> norm_adv(entries.size());
  for (size_t i = 0; i < entries.size(); ++i)
    norm_adv[i] = (entries[i].advantage - mean) / std;

  std::vector<Param*> params = actor.all();
  for (Param* p : critic.all()) params.push_back(p);

  UpdateStats stats;
  int stat_count = 0;
  std::vector<size_t> perm(entries.size());
  std::iota(perm.begin(), perm.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const size_t mb_count = std::min<size_t>(cfg.minibatches, perm.size());
    for (size_t mb = 0; mb < mb_count; ++mb) {
      const size_t lo = perm.size() * mb / mb_count;
      const size_t hi = perm.size() * (mb + 1) / mb_count;
      if (lo == hi) continue;

      Tape tape;
      Tensor policy_sum = tape.scalar(0.0);
      Tensor value_sum = tape.scalar(0.0);
      Tensor entropy_sum = tape.scalar(0.0);
      for (size_t k = lo; k < hi; ++k) {
        const auto& e = entries[perm[k]];
        Tensor logp = policy_log_probs(tape, e.obs, actor);
        Evaluation ev = evaluate_action(tape, logp, e.action, e.obs.mask);
        Tensor ratio =
            tape.exp(tape.add_scalar(ev.log_prob, -e.log_prob));
        Tensor surr1 = tape.scale(ratio, norm_adv[perm[k]]);
        Tensor surr2 = tape.scale(
            tape.clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio),
            norm_adv[perm[k]]);
        policy_sum = tape.sub(policy_sum, tape.min_elem(surr1, surr2));
        entropy_sum = tape.add(entropy_sum, ev.entropy);
        Tensor v = critic_value(tape, e.critic_feat, critic);
        value_sum =
            tape.add(value_sum, tape.square(tape.add_scalar(v, -e.ret)));
      }
      const double inv = 1.0 / double(hi - lo);
      Tensor policy_loss = tape.scale(policy_sum, inv);
      Tensor value_loss = tape.scale(value_sum, inv);
      Tensor entropy_mean = tape.scale(entropy_sum, inv);
      Tensor loss =
          tape.add(tape.sub(policy_loss, tape.scale(entropy_mean, cfg.entropy_coef)),
                   tape.scale(value_loss, cfg.value_coef));

      const double loss_val = loss.val()(0, 0);
      if (!std::isfinite(loss_val))
        throw std::runtime_error("ppo_update: non-finite loss (policy=" +
                                 std::to_string(policy_loss.val()(0, 0)) +
                                 ", value=" +
                                 std::to_string(value_loss.val()(0, 0)) + ")");

      for (Param* p : params) p->zero_grad();
      tape.backward(loss);
      for (Param* p : params)
        for (double g : p->grad.v)
          if (!std::isfinite(g))
            throw std::runtime_error("ppo_update: non-finite gradient in " +
                                     p->name);
      detail::clip_grad_norm(params, cfg.max_grad_norm);
      opt.step(params);

      stats.actor_loss += policy_loss.val()(0, 0);
      stats.value_loss += value_loss.val()(0, 0);
      stats.entropy += entropy_mean.val()(0, 0);
      ++stat_count;
    }
  }
  if (stat_count > 0) {
    stats.actor_loss /= stat_count;
    stats.value_loss /= stat_count;
    stats.entropy /= stat_count;
  }
  return stats;
}

/// Greedy (argmax) evaluation episode; returns time-averaged mean idleness.
inline double greedy_eval_idleness(PatrolEnv& env, ActorParams& actor,
                                   uint64_t seed) {
  env.reset(seed);
  const int T = env.config().episode_len;
  double acc = 0.0;
  while (env.state().clock < T) {
    const auto living = env.living_agents();
    std::vector<int> actions;
    for (int id : living) {
      const auto& loc = env.state().agents[id].loc;
      if (loc.at_node_p()) {
        Tape tape;
        Observation obs = env.observe(id);
        Tensor logp = policy_log_probs(tape, obs, actor);
        actions.push_back(argmax_action(logp.val(), obs.mask));
      } else {
        actions.push_back(env.forced_continue_action(id));
      }
    }
    env.step(actions);
    acc += average_idleness(env.state());
  }
  return acc / T;
}

struct TrainCurvePoint {
  long step = 0;
  double mean_episode_reward = 0.0;
  double eval_avg_idleness = 0.0;
  double actor_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  std::vector<TrainCurvePoint> curve;
};

inline void write_training_curve(const std::string& path,
                                 const std::vector<TrainCurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,mean_episode_reward,eval_avg_idleness,actor_loss,value_loss,"
         "entropy\n";
  char buf[256];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g,%.9g,%.9g\n", p.step,
                  p.mean_episode_reward, p.eval_avg_idleness, p.actor_loss,
                  p.value_loss, p.entropy);
    out << buf;
  }
}

/// Full training loop: rollout, modified GAE, PPO update, periodic greedy
/// evaluation, checkpoints and a metrics CSV in out_dir. Attrition is never
/// injected during training.
inline TrainResult train(const PatrolGraph& graph, EnvConfig env_cfg,
                         const ActorConfig& actor_cfg, const TrainConfig& cfg,
                         ActorParams& actor, CriticParams& critic,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  env_cfg.episode_len = cfg.episode_len;
  PatrolEnv env(graph, env_cfg);
  PatrolEnv eval_env(graph, env_cfg);

  Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 update_rng(cfg.seed ^ 0xda3e39cb94b95bdbull);

  TrainResult result;
  const long steps_per_iter = long(cfg.n_envs) * cfg.episode_len;
  long steps_done = 0;
  int iteration = 0;
  while (steps_done + steps_per_iter <= cfg.total_steps) {
    RolloutBuffer buffer = collect_rollout(env, actor, critic, cfg, iteration);
    compute_modified_gae(buffer, cfg.gamma, cfg.lambda);
    UpdateStats stats = ppo_update(buffer, actor, critic, opt, cfg, update_rng);
    steps_done += steps_per_iter;

    TrainCurvePoint pt;
    pt.step = steps_done;
    double mean_r = 0.0;
    for (double r : buffer.episode_reward) mean_r += r;
    pt.mean_episode_reward = mean_r / buffer.episode_reward.size();
    pt.eval_avg_idleness =
        greedy_eval_idleness(eval_env, actor, cfg.seed + 31337);
    pt.actor_loss = stats.actor_loss;
    pt.value_loss = stats.value_loss;
    pt.entropy = stats.entropy;
    result.curve.push_back(pt);

    ++iteration;
    if (cfg.checkpoint_every > 0 && iteration % cfg.checkpoint_every == 0) {
      const auto ps = actor.all();
      const std::vector<const Param*> cps(ps.begin(), ps.end());
      save_checkpoint(
          out_dir + "/checkpoint_" + std::to_string(iteration) + ".txt", cps);
    }
  }

  const auto actor_ps = actor.all();
  const std::vector<const Param*> actor_cps(actor_ps.begin(), actor_ps.end());
  save_checkpoint(out_dir + "/checkpoint_final.txt", actor_cps);
  // Critic weights are stored separately: execution artifacts never read them.
  const auto critic_ps = critic.all();
  const std::vector<const Param*> critic_cps(critic_ps.begin(), critic_ps.end());
  save_checkpoint(out_dir + "/critic_final.txt", critic_cps);
  std::ofstream info(out_dir + "/policy_info.txt");
  info << policy_info(actor_cfg);
  write_training_curve(out_dir + "/metrics.csv", result.curve);
  return result;
}

}  // namespace magec

#endif  // MAGEC_TRAINER_HPP_
