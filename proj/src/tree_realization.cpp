#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <json.hpp>

#include "stembed/errors.hpp"
#include "stembed/filling_tree.hpp"

namespace stembed {

namespace {

constexpr std::size_t kUnmapped = std::numeric_limits<std::size_t>::max();

struct Edge {
  std::size_t to;
  double w;
};

struct Builder {
  std::vector<std::vector<Edge>> adj;
  std::vector<std::size_t> point_at;  // node -> point or kUnmapped

  std::size_t add_node() {
    adj.emplace_back();
    point_at.push_back(kUnmapped);
    return adj.size() - 1;
  }
  void link(std::size_t a, std::size_t b, double w) {
    adj[a].push_back({b, w});
    adj[b].push_back({a, w});
  }
  void unlink(std::size_t a, std::size_t b) {
    auto drop = [](std::vector<Edge>& v, std::size_t t) {
      v.erase(std::find_if(v.begin(), v.end(), [&](const Edge& e) { return e.to == t; }));
    };
    drop(adj[a], b);
    drop(adj[b], a);
  }
  // node path from a to b with edge weights (weights[i] joins path[i], path[i+1])
  void path(std::size_t a, std::size_t b, std::vector<std::size_t>& nodes,
            std::vector<double>& weights) const {
    std::vector<std::size_t> prev(adj.size(), kUnmapped);
    std::vector<double> pw(adj.size(), 0.0);
    std::queue<std::size_t> q;
    q.push(a);
    prev[a] = a;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      if (u == b) break;
      for (const Edge& e : adj[u]) {
        if (prev[e.to] == kUnmapped) {
          prev[e.to] = u;
          pw[e.to] = e.w;
          q.push(e.to);
        }
      }
    }
    nodes.clear();
    weights.clear();
    for (std::size_t u = b; u != a; u = prev[u]) {
      nodes.push_back(u);
      weights.push_back(pw[u]);
    }
    nodes.push_back(a);
    std::reverse(nodes.begin(), nodes.end());
    std::reverse(weights.begin(), weights.end());
  }
};

}  // namespace

std::vector<double> WeightedTree::distances_from(std::size_t source) const {
  const std::size_t m = node_count();
  if (source >= m) throw ArgumentError("tree node out of range");
  std::vector<std::vector<std::size_t>> children(m);
  for (std::size_t v = 1; v < m; ++v) children[static_cast<std::size_t>(parent[v])].push_back(v);
  std::vector<double> dist(m, -1.0);
  std::vector<std::size_t> stack{source};
  dist[source] = 0.0;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    auto visit = [&](std::size_t v, double w) {
      if (dist[v] < 0.0) {
        dist[v] = dist[u] + w;
        stack.push_back(v);
      }
    };
    if (parent[u] >= 0) visit(static_cast<std::size_t>(parent[u]), weight[u]);
    for (std::size_t c : children[u]) visit(c, weight[c]);
  }
  return dist;
}

FiniteMetricSpace WeightedTree::point_metric(std::size_t basepoint) const {
  const std::size_t n = leaf_of.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = distances_from(leaf_of[i]);
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = row[leaf_of[j]];
  }
  return FiniteMetricSpace(n, std::move(d), basepoint);
}

WeightedTree realize_tree(const FiniteMetricSpace& M, double tol_rel) {
  const std::size_t n = M.size();
  const double snap = 1e-12 * M.diameter();
  Builder B;
  std::vector<std::size_t> node_of(n, kUnmapped);
  node_of[0] = B.add_node();
  B.point_at[node_of[0]] = 0;
  std::vector<std::size_t> pnodes;
  std::vector<double> pweights;
  for (std::size_t z = 1; z < n; ++z) {
    // attach z along the path from point 0 toward the point maximizing (z|b)_0
    std::size_t best = 0;
    double best_g = -1.0;
    for (std::size_t b = 0; b < z; ++b) {
      const double g = 0.5 * (M(z, 0) + M(b, 0) - M(z, b));
      if (g > best_g) {
        best_g = g;
        best = b;
      }
    }
    const double t = std::clamp(best_g, 0.0, M(0, best));
    B.path(node_of[0], node_of[best], pnodes, pweights);
    std::size_t attach = pnodes.back();
    double walked = 0.0;
    for (std::size_t i = 0; i < pweights.size(); ++i) {
      if (std::abs(walked - t) <= snap) {
        attach = pnodes[i];
        break;
      }
      if (walked + pweights[i] > t + snap) {
        const std::size_t mid = B.add_node();
        const double first = t - walked;
        B.unlink(pnodes[i], pnodes[i + 1]);
        B.link(pnodes[i], mid, first);
        B.link(mid, pnodes[i + 1], pweights[i] - first);
        attach = mid;
        break;
      }
      walked += pweights[i];
    }
    const double pendant = M(0, z) - t;
    if (pendant <= snap) {
      if (B.point_at[attach] != kUnmapped) {
        throw InconsistencyError("points " + std::to_string(B.point_at[attach]) + " and " +
                                 std::to_string(z) + " land on the same tree node");
      }
      node_of[z] = attach;
    } else {
      node_of[z] = B.add_node();
      B.link(attach, node_of[z], pendant);
    }
    B.point_at[node_of[z]] = z;
  }

  // root at point 0, breadth-first numbering so parents precede children
  WeightedTree T;
  const std::size_t m = B.adj.size();
  std::vector<std::size_t> label(m, kUnmapped);
  std::queue<std::size_t> q;
  q.push(node_of[0]);
  label[node_of[0]] = 0;
  T.parent.push_back(-1);
  T.weight.push_back(0.0);
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    for (const Edge& e : B.adj[u]) {
      if (label[e.to] != kUnmapped) continue;
      label[e.to] = T.parent.size();
      T.parent.push_back(static_cast<long>(label[u]));
      T.weight.push_back(e.w);
      q.push(e.to);
    }
  }
  T.leaf_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) T.leaf_of[i] = label[node_of[i]];

  const double tol = tol_rel * M.diameter();
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = T.distances_from(T.leaf_of[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double err = std::abs(row[T.leaf_of[j]] - M(i, j));
      if (err > tol) {
        throw InconsistencyError("metric is not a tree metric: pair (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ") off by " + std::to_string(err));
      }
    }
  }
  return T;
}

std::string tree_to_json(const WeightedTree& T) {
  nlohmann::json j;
  j["nodes"] = T.node_count();
  j["parent"] = T.parent;
  j["weight"] = T.weight;
  nlohmann::json leaves = nlohmann::json::object();
  for (std::size_t i = 0; i < T.leaf_of.size(); ++i) leaves[std::to_string(i)] = T.leaf_of[i];
  j["leaf_of"] = leaves;
  return j.dump(2);
}

WeightedTree tree_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("tree json: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("tree json: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "nodes" && it.key() != "parent" && it.key() != "weight" &&
        it.key() != "leaf_of") {
      throw FormatError("tree json: unknown field '" + it.key() + "'");
    }
  }
  WeightedTree T;
  try {
    const auto count = j.at("nodes").get<std::size_t>();
    T.parent = j.at("parent").get<std::vector<long>>();
    T.weight = j.at("weight").get<std::vector<double>>();
    if (T.parent.size() != count || T.weight.size() != count || count == 0) {
      throw FormatError("tree json: parent and weight must have 'nodes' entries");
    }
    if (T.parent[0] != -1) throw FormatError("tree json: node 0 must be the root");
    for (std::size_t v = 1; v < count; ++v) {
      if (T.parent[v] < 0 || static_cast<std::size_t>(T.parent[v]) >= v) {
        throw FormatError("tree json: parent of node " + std::to_string(v) + " must precede it");
      }
      if (!(T.weight[v] >= 0.0) || !std::isfinite(T.weight[v])) {
        throw FormatError("tree json: bad weight at node " + std::to_string(v));
      }
    }
    const auto& leaves = j.at("leaf_of");
    if (!leaves.is_object()) throw FormatError("tree json: leaf_of must be an object");
    T.leaf_of.assign(leaves.size(), kUnmapped);
    for (auto it = leaves.begin(); it != leaves.end(); ++it) {
      std::size_t pos = 0;
      const std::size_t idx = std::stoul(it.key(), &pos);
      if (pos != it.key().size() || idx >= T.leaf_of.size()) {
        throw FormatError("tree json: bad point index '" + it.key() + "'");
      }
      const auto node = it.value().get<std::size_t>();
      if (node >= count) throw FormatError("tree json: leaf node out of range");
      T.leaf_of[idx] = node;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tree json: ") + e.what());
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("tree json: ") + e.what());
  }
  return T;
}

}  // namespace stembed
