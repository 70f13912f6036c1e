#ifndef MAGEC_PATROL_GRAPH_HPP_
#define MAGEC_PATROL_GRAPH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace magec {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double euclidean_distance(const Vec2& p, const Vec2& q) {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return std::sqrt(dx * dx + dy * dy);
}

struct GraphEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;  // meters; equals the Euclidean endpoint distance
};

/// Weighted undirected patrol graph embedded in the plane. Node ids are
/// 0..m-1, edge weights are metric lengths, and the graph is connected.
struct PatrolGraph {
  std::vector<Vec2> positions;
  std::vector<GraphEdge> edges;

  int num_nodes() const { return static_cast<int>(positions.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
};

/// Directed two-way view of a PatrolGraph with a fixed neighbor ordering
/// (ascending node id). Each node assigns local indices 0..deg(v)-1 to its
/// neighbors; the index doubles as the discrete action identifier.
struct BidirectedView {
  // neighbors[v] is sorted ascending by node id.
  std::vector<std::vector<int>> neighbors;
  // edge_weight[v][i] is the length of the edge to neighbors[v][i].
  std::vector<std::vector<double>> edge_weight;
  int max_degree = 0;

  int degree(int v) const { return static_cast<int>(neighbors[v].size()); }

  // Index of node u within v's neighbor list; -1 if not adjacent.
  int neighbor_index(int v, int u) const {
    const auto& nb = neighbors[v];
    auto it = std::lower_bound(nb.begin(), nb.end(), u);
    if (it == nb.end() || *it != u) return -1;
    return static_cast<int>(it - nb.begin());
  }

  double weight_between(int v, int u) const {
    int i = neighbor_index(v, u);
    if (i < 0) throw std::runtime_error("weight_between: nodes not adjacent");
    return edge_weight[v][i];
  }
};

inline BidirectedView bidirect(const PatrolGraph& g) {
  BidirectedView view;
  const int m = g.num_nodes();
  view.neighbors.assign(m, {});
  view.edge_weight.assign(m, {});
  for (const auto& e : g.edges) {
    view.neighbors[e.a].push_back(e.b);
    view.neighbors[e.b].push_back(e.a);
  }
  for (int v = 0; v < m; ++v) {
    std::sort(view.neighbors[v].begin(), view.neighbors[v].end());
    view.edge_weight[v].resize(view.neighbors[v].size());
  }
  for (const auto& e : g.edges) {
    view.edge_weight[e.a][view.neighbor_index(e.a, e.b)] = e.weight;
    view.edge_weight[e.b][view.neighbor_index(e.b, e.a)] = e.weight;
  }
  for (int v = 0; v < m; ++v)
    view.max_degree = std::max(view.max_degree, view.degree(v));
  return view;
}

inline double max_edge_weight(const PatrolGraph& g) {
  double w = 0.0;
  for (const auto& e : g.edges) w = std::max(w, e.weight);
  return w;
}

inline bool is_connected(const PatrolGraph& g) {
  const int m = g.num_nodes();
  if (m == 0) return false;
  std::vector<std::vector<int>> adj(m);
  for (const auto& e : g.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<char> seen(m, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int u : adj[v])
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        q.push(u);
      }
  }
  return count == m;
}

inline void validate_graph(const PatrolGraph& g) {
  const int m = g.num_nodes();
  if (m < 1) throw std::runtime_error("graph has no nodes");
  std::set<std::pair<int, int>> seen;
  for (const auto& e : g.edges) {
    if (e.a < 0 || e.a >= m || e.b < 0 || e.b >= m)
      throw std::runtime_error("edge references unknown node " +
                               std::to_string(e.a < 0 || e.a >= m ? e.a : e.b));
    if (e.a == e.b)
      throw std::runtime_error("self-loop at node " + std::to_string(e.a));
    auto key = std::minmax(e.a, e.b);
    if (!seen.insert({key.first, key.second}).second)
      throw std::runtime_error("duplicate edge " + std::to_string(e.a) + "-" +
                               std::to_string(e.b));
    double d = euclidean_distance(g.positions[e.a], g.positions[e.b]);
    if (!(e.weight > 0.0))
      throw std::runtime_error("non-positive weight on edge " +
                               std::to_string(e.a) + "-" + std::to_string(e.b));
    if (std::fabs(e.weight - d) > 1e-6 * std::max(1.0, d))
      throw std::runtime_error("weight of edge " + std::to_string(e.a) + "-" +
                               std::to_string(e.b) +
                               " does not match Euclidean distance");
  }
  if (!is_connected(g)) throw std::runtime_error("graph is disconnected");
}

// ---------------------------------------------------------------------------
// Text format:
//   nodes <m>
//   node <id> <x> <y>        (m lines)
//   edges <count>
//   edge <a> <b> [weight]
// Lines starting with '#' are comments. Missing weights are filled with the
// Euclidean endpoint distance.
// ---------------------------------------------------------------------------

inline PatrolGraph load_graph(const std::string& text) {
  PatrolGraph g;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int expected_nodes = -1, expected_edges = -1;
  int seen_nodes = 0;
  std::vector<char> have_node;

  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("graph parse error at line " +
                             std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    if (kw[0] == '#') continue;
    if (kw == "nodes") {
      if (!(ls >> expected_nodes) || expected_nodes < 1)
        fail("bad node count");
      g.positions.assign(expected_nodes, {});
      have_node.assign(expected_nodes, 0);
    } else if (kw == "node") {
      int id;
      double x, y;
      if (!(ls >> id >> x >> y)) fail("malformed node line");
      if (expected_nodes < 0) fail("node before nodes header");
      if (id < 0 || id >= expected_nodes)
        fail("node id " + std::to_string(id) + " out of range");
      if (have_node[id]) fail("duplicate node id " + std::to_string(id));
      if (!std::isfinite(x) || !std::isfinite(y)) fail("non-finite position");
      have_node[id] = 1;
      g.positions[id] = {x, y};
      ++seen_nodes;
    } else if (kw == "edges") {
      if (!(ls >> expected_edges) || expected_edges < 0)
        fail("bad edge count");
    } else if (kw == "edge") {
      int a, b;
      if (!(ls >> a >> b)) fail("malformed edge line");
      if (expected_nodes < 0 || seen_nodes != expected_nodes)
        fail("edge before all nodes are declared");
      if (a < 0 || a >= expected_nodes || b < 0 || b >= expected_nodes)
        fail("edge endpoint out of range");
      GraphEdge e{a, b, 0.0};
      if (!(ls >> e.weight))
        e.weight = euclidean_distance(g.positions[a], g.positions[b]);
      g.edges.push_back(e);
    } else {
      fail("unknown keyword '" + kw + "'");
    }
  }
  if (expected_nodes < 0) throw std::runtime_error("graph file has no nodes header");
  if (seen_nodes != expected_nodes)
    throw std::runtime_error("graph file declares " +
                             std::to_string(expected_nodes) + " nodes but has " +
                             std::to_string(seen_nodes));
  if (expected_edges >= 0 && expected_edges != g.num_edges())
    throw std::runtime_error("graph file declares " +
                             std::to_string(expected_edges) + " edges but has " +
                             std::to_string(g.num_edges()));
  validate_graph(g);
  return g;
}

/// Canonical form: sorted ids, 6 decimal places, explicit weights.
inline std::string write_graph(const PatrolGraph& g) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "nodes %d\n", g.num_nodes());
  out += buf;
  for (int v = 0; v < g.num_nodes(); ++v) {
    std::snprintf(buf, sizeof(buf), "node %d %.6f %.6f\n", v, g.positions[v].x,
                  g.positions[v].y);
    out += buf;
  }
  std::vector<GraphEdge> es = g.edges;
  for (auto& e : es)
    if (e.a > e.b) std::swap(e.a, e.b);
  std::sort(es.begin(), es.end(), [](const GraphEdge& l, const GraphEdge& r) {
    return std::tie(l.a, l.b) < std::tie(r.a, r.b);
  });
  std::snprintf(buf, sizeof(buf), "edges %d\n", static_cast<int>(es.size()));
  out += buf;
  for (const auto& e : es) {
    std::snprintf(buf, sizeof(buf), "edge %d %d %.6f\n", e.a, e.b, e.weight);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random connected geometric graphs for train/test splits.
// ---------------------------------------------------------------------------

struct GeometricGraphConfig {
  int nodes = 8;
  uint64_t seed = 0;
  double area = 60.0;           // side length of the square arena, meters
  double connect_radius = 0.0;  // 0 -> 0.45 * area
  int max_degree = 10;
};

inline PatrolGraph generate_geometric_graph(const GeometricGraphConfig& cfg) {
  if (cfg.nodes < 2) throw std::runtime_error("need at least 2 nodes");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coord(0.0, cfg.area);
  const double min_sep = 0.25 * cfg.area / std::sqrt(double(cfg.nodes));

  PatrolGraph g;
  while (g.num_nodes() < cfg.nodes) {
    Vec2 p{coord(rng), coord(rng)};
    bool ok = true;
    for (const auto& q : g.positions)
      if (euclidean_distance(p, q) < min_sep) {
        ok = false;
        break;
      }
    if (ok) g.positions.push_back(p);
  }
  // Round positions so the canonical file is exact.
  for (auto& p : g.positions) {
    p.x = std::round(p.x * 1e6) / 1e6;
    p.y = std::round(p.y * 1e6) / 1e6;
  }

  const int m = cfg.nodes;
  auto dist = [&](int a, int b) {
    return euclidean_distance(g.positions[a], g.positions[b]);
  };

  // Euclidean MST (Prim) guarantees connectivity.
  std::vector<char> in_tree(m, 0);
  std::vector<double> best(m, 1e300);
  std::vector<int> best_from(m, -1);
  in_tree[0] = 1;
  for (int v = 1; v < m; ++v) {
    best[v] = dist(0, v);
    best_from[v] = 0;
  }
  std::vector<int> degree(m, 0);
  std::set<std::pair<int, int>> present;
  for (int it = 1; it < m; ++it) {
    int pick = -1;
    for (int v = 0; v < m; ++v)
      if (!in_tree[v] && (pick < 0 || best[v] < best[pick])) pick = v;
    in_tree[pick] = 1;
    g.edges.push_back({best_from[pick], pick, dist(best_from[pick], pick)});
    present.insert(std::minmax(best_from[pick], pick));
    ++degree[best_from[pick]];
    ++degree[pick];
    for (int v = 0; v < m; ++v)
      if (!in_tree[v] && dist(pick, v) < best[v]) {
        best[v] = dist(pick, v);
        best_from[v] = pick;
      }
  }

  // Densify with short edges, respecting the degree cap.
  const double radius =
      cfg.connect_radius > 0.0 ? cfg.connect_radius : 0.45 * cfg.area;
  std::vector<GraphEdge> cand;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (!present.count({a, b}) && dist(a, b) <= radius)
        cand.push_back({a, b, dist(a, b)});
  std::sort(cand.begin(), cand.end(), [](const GraphEdge& l, const GraphEdge& r) {
    return std::tie(l.weight, l.a, l.b) < std::tie(r.weight, r.a, r.b);
  });
  for (const auto& e : cand)
    if (degree[e.a] < cfg.max_degree && degree[e.b] < cfg.max_degree) {
      g.edges.push_back(e);
      ++degree[e.a];
      ++degree[e.b];
    }

  validate_graph(g);
  return g;
}

}  // namespace magec

#endif  // MAGEC_PATROL_GRAPH_HPP_
