#ifndef MAGEC_BASELINES_HPP_
#define MAGEC_BASELINES_HPP_

#include <random>
#include <stdexcept>
#include <vector>

#include "magec/environment.hpp"

namespace magec {

/// Uniform over unmasked actions.
inline int random_walk_policy(const Observation& obs, std::mt19937_64& rng) {
  std::vector<int> options;
  for (size_t j = 0; j < obs.mask.size(); ++j)
    if (obs.mask[j]) options.push_back(static_cast<int>(j));
  if (options.empty()) throw std::runtime_error("no unmasked action");
  if (options.size() == 1) return options[0];
  std::uniform_int_distribution<size_t> pick(0, options.size() - 1);
  return options[pick(rng)];
}

/// Picks the unmasked neighbor maximizing believed idleness per meter of
/// travel; ties go to the lowest neighbor index. Deterministic.
inline int greedy_idleness_policy(const Observation& obs) {
  int best = -1;
  double best_score = 0.0;
  for (size_t j = 0; j < obs.action_neighbors.size(); ++j) {
    if (!obs.mask[j]) continue;
    const double score = obs.neighbor_zeta[j] / obs.neighbor_dist[j];
    if (best < 0 || score > best_score) {
      best = static_cast<int>(j);
      best_score = score;
    }
  }
  if (best < 0) throw std::runtime_error("no unmasked action");
  return best;
}

}  // namespace magec

#endif  // MAGEC_BASELINES_HPP_
