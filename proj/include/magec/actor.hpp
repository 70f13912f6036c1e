#ifndef MAGEC_ACTOR_HPP_
#define MAGEC_ACTOR_HPP_

#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "magec/environment.hpp"
#include "magec/tensor.hpp"

namespace magec {

struct ActorConfig {
  int layers = 10;  // message-passing depth
  int hidden = 64;
  int max_neighbors = 10;
  int scorer_hidden = 64;
  int selector_hidden = 64;

  int edge_dim() const { return edge_feat_dim(max_neighbors); }
  int embed_dim() const { return layers * hidden; }
};

/// All learnable weights of the actor: per-layer GraphSAGE matrices, the
/// neighbor scorer, and the selector.
struct ActorParams {
  ActorConfig cfg;
  std::vector<Param> conv_w, conv_b;
  std::vector<Param> scorer;    // w1, b1, w2, b2
  std::vector<Param> selector;  // w1, b1, w2, b2

  explicit ActorParams(ActorConfig c) : cfg(c) {
    if (cfg.layers < 1) throw std::runtime_error("actor needs >= 1 layer");
    int d_prev = node_feat_dim();
    for (int k = 0; k < cfg.layers; ++k) {
      // input: own state (d_prev) + aggregated messages (d_prev + edge feats)
      const int in = 2 * d_prev + cfg.edge_dim();
      conv_w.emplace_back("conv" + std::to_string(k) + ".w", in, cfg.hidden);
      conv_b.emplace_back("conv" + std::to_string(k) + ".b", 1, cfg.hidden);
      d_prev = cfg.hidden;
    }
    scorer.emplace_back("scorer.w1", cfg.embed_dim(), cfg.scorer_hidden);
    scorer.emplace_back("scorer.b1", 1, cfg.scorer_hidden);
    scorer.emplace_back("scorer.w2", cfg.scorer_hidden, 1);
    scorer.emplace_back("scorer.b2", 1, 1);
    selector.emplace_back("selector.w1", cfg.max_neighbors, cfg.selector_hidden);
    selector.emplace_back("selector.b1", 1, cfg.selector_hidden);
    selector.emplace_back("selector.w2", cfg.selector_hidden, cfg.max_neighbors);
    selector.emplace_back("selector.b2", 1, cfg.max_neighbors);
  }

  void init(uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto* p : all()) xavier_init(*p, rng);
  }

  std::vector<Param*> all() {
    std::vector<Param*> ps;
    for (auto& p : conv_w) ps.push_back(&p);
    for (auto& p : conv_b) ps.push_back(&p);
    for (auto& p : scorer) ps.push_back(&p);
    for (auto& p : selector) ps.push_back(&p);
    return ps;
  }
};

struct EmbeddingSet {
  Tensor z;                      // n x (layers * hidden), jumping knowledge
  std::vector<Tensor> layer_h;   // per-layer normalized hidden states
};

namespace detail {

struct ObsConstants {
  Mat node_feats;          // n x node_feat_dim
  Mat edge_feats;          // ne x edge_dim
  Mat avg;                 // n x ne averaging matrix (1/indeg at receivers)
  std::vector<int> senders;
};

inline ObsConstants obs_constants(const Observation& obs, int edge_dim) {
  ObsConstants c;
  const int n = static_cast<int>(obs.nodes.size());
  const int ne = static_cast<int>(obs.edges.size());
  c.node_feats = Mat(n, node_feat_dim());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < node_feat_dim(); ++j)
      c.node_feats(i, j) = obs.nodes[i].feat[j];
  c.edge_feats = Mat(ne, edge_dim);
  c.avg = Mat(n, ne);
  std::vector<int> indeg(n, 0);
  for (const auto& e : obs.edges) ++indeg[e.dst];
  for (int e = 0; e < ne; ++e) {
    const auto& ed = obs.edges[e];
    if (static_cast<int>(ed.feat.size()) != edge_dim)
      throw std::runtime_error("edge feature dimension mismatch");
    for (int j = 0; j < edge_dim; ++j) c.edge_feats(e, j) = ed.feat[j];
    c.avg(ed.dst, e) = 1.0 / indeg[ed.dst];
    c.senders.push_back(ed.src);
  }
  return c;
}

}  // namespace detail

/// GraphSAGE forward pass with edge attributes: each layer gathers sender
/// states, concatenates the directed-edge features, mean-aggregates per
/// receiver, applies a linear+relu update and row-wise L2 normalization.
/// The final embedding concatenates every layer's output.
inline EmbeddingSet embed(Tape& tape, const Observation& obs,
                          ActorParams& params) {
  const auto c = detail::obs_constants(obs, params.cfg.edge_dim());
  Tensor h = tape.constant(c.node_feats);
  Tensor edge_feats = tape.constant(c.edge_feats);
  Tensor avg = tape.constant(c.avg);

  EmbeddingSet out;
  for (int k = 0; k < params.cfg.layers; ++k) {
    Tensor agg;
    if (c.senders.empty()) {
      // no edges at all: aggregate is a zero vector
      agg = tape.constant(
          Mat(c.node_feats.rows, tape.val(h.id).cols + params.cfg.edge_dim()));
    } else {
      Tensor sent = tape.gather_rows(h, c.senders);
      Tensor msg = tape.concat_cols({sent, edge_feats});
      agg = tape.matmul(avg, msg);
    }
    Tensor cat = tape.concat_cols({h, agg});
    Tensor lin = tape.add(tape.matmul(cat, tape.param(params.conv_w[k])),
                          tape.param(params.conv_b[k]));
    h = tape.l2_normalize_rows(tape.relu(lin));
    out.layer_h.push_back(h);
  }
  out.z = params.cfg.layers == 1 ? out.layer_h[0]
                                 : tape.concat_cols(out.layer_h);
  return out;
}

/// Scores each neighbor of the decision node (in neighbor-index order)
/// through the scorer MLP; missing slots are zero-padded. Returns a
/// 1 x max_neighbors row.
inline Tensor score_neighbors(Tape& tape, const EmbeddingSet& emb,
                              const Observation& obs, ActorParams& params) {
  if (obs.action_neighbors.empty())
    throw std::runtime_error("decision node has no neighbors");
  Tensor zn = tape.gather_rows(emb.z, obs.action_neighbors);
  Tensor h1 = tape.relu(tape.add(tape.matmul(zn, tape.param(params.scorer[0])),
                                 tape.param(params.scorer[1])));
  Tensor s = tape.add(tape.matmul(h1, tape.param(params.scorer[2])),
                      tape.param(params.scorer[3]));
  Tensor padded = tape.pad_rows(s, params.cfg.max_neighbors);
  return tape.transpose(padded);
}

/// Selector MLP + masked log-softmax: the categorical policy over actions.
inline Tensor action_log_probs(Tape& tape, Tensor scores,
                               const std::vector<bool>& mask,
                               ActorParams& params) {
  Tensor h1 =
      tape.relu(tape.add(tape.matmul(scores, tape.param(params.selector[0])),
                         tape.param(params.selector[1])));
  Tensor logits = tape.add(tape.matmul(h1, tape.param(params.selector[2])),
                           tape.param(params.selector[3]));
  return tape.masked_log_softmax(logits, mask);
}

inline Tensor policy_log_probs(Tape& tape, const Observation& obs,
                               ActorParams& params) {
  EmbeddingSet emb = embed(tape, obs, params);
  Tensor scores = score_neighbors(tape, emb, obs, params);
  return action_log_probs(tape, scores, obs.mask, params);
}

/// Samples an action from row log-probs. Masked actions have probability
/// exactly zero. Returns the action; log_prob_out receives its log-prob.
inline int sample_action(const Mat& logp, const std::vector<bool>& mask,
                         std::mt19937_64& rng, double* log_prob_out = nullptr) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  double cum = 0.0;
  int chosen = -1;
  for (int j = 0; j < logp.cols; ++j) {
    if (!mask[j]) continue;
    cum += std::exp(logp(0, j));
    chosen = j;  // fall through to the last unmasked on rounding shortfall
    if (draw < cum) break;
  }
  if (log_prob_out) *log_prob_out = logp(0, chosen);
  return chosen;
}

inline int argmax_action(const Mat& logp, const std::vector<bool>& mask) {
  int best = -1;
  for (int j = 0; j < logp.cols; ++j) {
    if (!mask[j]) continue;
    if (best < 0 || logp(0, j) > logp(0, best)) best = j;
  }
  return best;
}

/// Log-prob of a given action plus distribution entropy, both differentiable.
struct Evaluation {
  Tensor log_prob;
  Tensor entropy;
};

inline Evaluation evaluate_action(Tape& tape, Tensor logp, int action,
                                  const std::vector<bool>& mask) {
  if (action < 0 || action >= static_cast<int>(mask.size()) || !mask[action])
    throw std::runtime_error("evaluate_action: action is masked");
  return {tape.pick(logp, 0, action), tape.entropy_masked(logp, mask)};
}

/// Human-readable architecture summary for reproducibility dumps.
inline std::string policy_info(const ActorConfig& cfg) {
  std::string s;
  s += "layers " + std::to_string(cfg.layers) + "\n";
  s += "hidden " + std::to_string(cfg.hidden) + "\n";
  s += "max_neighbors " + std::to_string(cfg.max_neighbors) + "\n";
  s += "scorer_hidden " + std::to_string(cfg.scorer_hidden) + "\n";
  s += "selector_hidden " + std::to_string(cfg.selector_hidden) + "\n";
  return s;
}

inline ActorConfig parse_policy_info(const std::string& text) {
  ActorConfig cfg;
  std::istringstream in(text);
  std::string key;
  int value;
  while (in >> key >> value) {
    if (key == "layers") cfg.layers = value;
    else if (key == "hidden") cfg.hidden = value;
    else if (key == "max_neighbors") cfg.max_neighbors = value;
    else if (key == "scorer_hidden") cfg.scorer_hidden = value;
    else if (key == "selector_hidden") cfg.selector_hidden = value;
    else throw std::runtime_error("unknown policy-info key: " + key);
  }
  return cfg;
}

}  // namespace magec

#endif  // MAGEC_ACTOR_HPP_
