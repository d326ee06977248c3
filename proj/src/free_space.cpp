#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>

#include "stembed/errors.hpp"
#include "stembed/free_space.hpp"
#include "stembed/parallel.hpp"
#include "stembed/random.hpp"

namespace stembed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double MeanZeroMeasure::total_variation() const {
  double s = 0.0;
  for (double w : weights) s += std::abs(w);
  return s;
}

void require_mean_zero(const MeanZeroMeasure& mu, std::size_t size) {
  if (mu.weights.size() != size) {
    throw ArgumentError("measure has " + std::to_string(mu.weights.size()) +
                        " weights for a space of " + std::to_string(size) + " points");
  }
  double sum = 0.0;
  for (double w : mu.weights) {
    if (!std::isfinite(w)) throw ArgumentError("measure weights must be finite");
    sum += w;
  }
  if (std::abs(sum) > 1e-12 * std::max(1.0, mu.total_variation())) {
    throw ArgumentError("measure is not mean-zero (sum " + std::to_string(sum) + ")");
  }
}

TransportPlan optimal_transport(const FiniteMetricSpace& X, const MeanZeroMeasure& mu,
                                std::optional<std::int64_t> integer_scale) {
  require_mean_zero(mu, X.size());
  std::vector<std::size_t> pos, neg;
  for (std::size_t x = 0; x < X.size(); ++x) {
    if (mu.weights[x] > 0.0) pos.push_back(x);
  }
  for (std::size_t x = 0; x < X.size(); ++x) {
    if (mu.weights[x] < 0.0) neg.push_back(x);
  }
  TransportPlan plan;
  if (pos.empty() || neg.empty()) return plan;

  double unit = 1.0;
  if (integer_scale) {
    if (*integer_scale <= 0) throw ArgumentError("integer scale must be positive");
    unit = static_cast<double>(*integer_scale);
  }
  auto scaled = [&](double w) {
    double v = std::abs(w) * unit;
    if (integer_scale) {
      const double r = std::round(v);
      if (std::abs(r - v) > 1e-9 * std::max(1.0, v)) {
        throw ArgumentError("measure is not integral at the requested scale");
      }
      v = r;
    }
    return v;
  };

  const std::size_t P = pos.size(), Q = neg.size();
  const std::size_t V = P + Q + 2, src = 0, snk = V - 1;
  std::vector<double> cap(V * V, 0.0), cost(V * V, 0.0);
  double supply = 0.0, demand = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    cap[src * V + 1 + i] = scaled(mu.weights[pos[i]]);
    supply += cap[src * V + 1 + i];
  }
  for (std::size_t j = 0; j < Q; ++j) {
    cap[(1 + P + j) * V + snk] = scaled(mu.weights[neg[j]]);
    demand += cap[(1 + P + j) * V + snk];
  }
  const double total = std::max(supply, demand);
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = 0; j < Q; ++j) {
      const std::size_t a = 1 + i, b = 1 + P + j;
      cap[a * V + b] = 2.0 * total;
      cost[a * V + b] = X(pos[i], neg[j]);
      cost[b * V + a] = -X(pos[i], neg[j]);
    }
  }
  const double eps = integer_scale ? 0.5 : 1e-14 * total;

  std::vector<double> pot(V, 0.0), dist(V);
  std::vector<std::size_t> prev(V);
  std::vector<char> done(V);
  double sent = 0.0;
  while (sent < std::min(supply, demand) - eps) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    dist[src] = 0.0;
    for (;;) {
      std::size_t u = V;
      for (std::size_t v = 0; v < V; ++v) {
        if (!done[v] && dist[v] < kInf && (u == V || dist[v] < dist[u])) u = v;
      }
      if (u == V) break;
      done[u] = 1;
      for (std::size_t v = 0; v < V; ++v) {
        if (done[v] || cap[u * V + v] <= eps) continue;
        const double rc = std::max(0.0, cost[u * V + v] + pot[u] - pot[v]);
        if (dist[u] + rc < dist[v]) {
          dist[v] = dist[u] + rc;
          prev[v] = u;
        }
      }
    }
    if (!(dist[snk] < kInf)) throw InternalError("transport network ran out of augmenting paths");
    for (std::size_t v = 0; v < V; ++v) pot[v] += dist[v] < kInf ? dist[v] : dist[snk];
    double push = kInf;
    for (std::size_t v = snk; v != src; v = prev[v]) push = std::min(push, cap[prev[v] * V + v]);
    for (std::size_t v = snk; v != src; v = prev[v]) {
      cap[prev[v] * V + v] -= push;
      cap[v * V + prev[v]] += push;
    }
    sent += push;
  }

  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = 0; j < Q; ++j) {
      const double f = cap[(1 + P + j) * V + 1 + i];
      if (f > eps) {
        const double m = f / unit;
        plan.arcs.push_back({pos[i], neg[j], m});
        plan.cost += m * X(pos[i], neg[j]);
      }
    }
  }
  return plan;
}

double free_norm(const FiniteMetricSpace& X, const MeanZeroMeasure& mu) {
  return optimal_transport(X, mu).cost;
}

DualCertificate dual_certificate(const FiniteMetricSpace& X, const MeanZeroMeasure& mu,
                                 const TransportPlan& plan) {
  require_mean_zero(mu, X.size());
  const std::size_t n = X.size();
  std::vector<double> pi(n, 0.0);
  const double tol = 1e-12 * std::max(1.0, X.diameter());
  bool changed = true;
  for (std::size_t round = 0; changed; ++round) {
    if (round > n) throw InternalError("negative cycle in the residual graph: plan is not optimal");
    changed = false;
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        if (x != y && pi[x] + X(x, y) < pi[y] - tol) {
          pi[y] = pi[x] + X(x, y);
          changed = true;
        }
      }
    }
    for (const auto& a : plan.arcs) {
      if (a.mass > 0.0 && pi[a.to] - X(a.from, a.to) < pi[a.from] - tol) {
        pi[a.from] = pi[a.to] - X(a.from, a.to);
        changed = true;
      }
    }
  }
  DualCertificate c;
  c.potential.resize(n);
  const double shift = pi[X.basepoint()];
  for (std::size_t x = 0; x < n; ++x) c.potential[x] = shift - pi[x];
  for (std::size_t x = 0; x < n; ++x) c.value += mu.weights[x] * c.potential[x];
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      c.lipschitz = std::max(c.lipschitz, std::abs(c.potential[x] - c.potential[y]) / X(x, y));
    }
  }
  return c;
}

double tree_free_norm(const WeightedTree& T, const MeanZeroMeasure& mu) {
  const std::size_t m = T.node_count();
  if (mu.weights.size() != T.leaf_of.size()) {
    throw ArgumentError("measure size does not match the tree's point count");
  }
  require_mean_zero(mu, T.leaf_of.size());
  std::vector<double> mass(m, 0.0);
  for (std::size_t x = 0; x < mu.weights.size(); ++x) {
    if (mu.weights[x] == 0.0) continue;
    if (T.leaf_of[x] >= m) throw ArgumentError("point " + std::to_string(x) + " is not mapped into the tree");
    mass[T.leaf_of[x]] += mu.weights[x];
  }
  double total = 0.0;
  for (std::size_t v = m; v-- > 1;) {
    total += T.weight[v] * std::abs(mass[v]);
    mass[static_cast<std::size_t>(T.parent[v])] += mass[v];
  }
  return total;
}

MeanZeroMeasure pushforward(const MeanZeroMeasure& mu, const SampledMap& sample) {
  if (mu.weights.size() != sample.image.size()) throw ArgumentError("measure and map sizes differ");
  MeanZeroMeasure out;
  out.weights.assign(sample.target->size(), 0.0);
  for (std::size_t x = 0; x < mu.weights.size(); ++x) out.weights[sample.image[x]] += mu.weights[x];
  return out;
}

std::vector<MeanZeroMeasure> random_test_measures(std::size_t n, std::size_t count,
                                                  std::uint64_t seed) {
  if (n < 2) throw ArgumentError("test measures need at least two points");
  Rng rng(seed);
  std::vector<MeanZeroMeasure> out;
  std::vector<std::size_t> idx(n);
  while (out.size() < count) {
    const std::size_t hi = std::min<std::size_t>(8, n);
    const std::size_t k = 2 + rng.below(hi - 1);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    MeanZeroMeasure mu;
    mu.weights.assign(n, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      mu.weights[idx[i]] = rng.uniform(-1.0, 1.0);
      sum += mu.weights[idx[i]];
    }
    mu.weights[idx[k - 1]] = -sum;
    if (mu.total_variation() > 0.0) out.push_back(std::move(mu));
  }
  return out;
}

std::size_t FreeEmbeddingReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(measures.begin(), measures.end(), [](const auto& m) { return !m.ok; }));
}

FreeEmbeddingReport verify_free_embedding(const FiniteMetricSpace& X, const StochasticEnsemble& E,
                                          const std::vector<MeanZeroMeasure>& measures, double s,
                                          unsigned threads) {
  if (!(s > 0.0)) throw ArgumentError("scaling factor must be positive");
  if (E.samples.empty()) throw ArgumentError("ensemble has no samples");
  for (const auto& mu : measures) require_mean_zero(mu, X.size());

  FreeEmbeddingReport rep;
  rep.scaling = s;
  rep.samples = E.samples.size();

  std::map<const FiniteMetricSpace*, std::size_t> which;
  std::vector<const FiniteMetricSpace*> distinct;
  std::vector<std::size_t> tree_of(E.samples.size());
  for (std::size_t i = 0; i < E.samples.size(); ++i) {
    auto [it, fresh] = which.emplace(E.samples[i].target.get(), distinct.size());
    if (fresh) distinct.push_back(E.samples[i].target.get());
    tree_of[i] = it->second;
  }
  std::vector<std::unique_ptr<WeightedTree>> trees(distinct.size());
  parallel_for(distinct.size(), threads, [&](std::size_t i) {
    trees[i] = std::make_unique<WeightedTree>(realize_tree(*distinct[i]));
  });

  if (X.size() >= 2) {
    for (const auto& st : ensemble_statistics(X, E, threads)) {
      rep.lipschitz_empirical = std::max(rep.lipschitz_empirical, st.mean / (s * st.distance));
    }
  }

  rep.measures.resize(measures.size());
  const double M = static_cast<double>(E.samples.size());
  parallel_for(measures.size(), threads, [&](std::size_t k) {
    FreeMeasureCheck& c = rep.measures[k];
    c.norm = free_norm(X, measures[k]);
    c.lower = s * c.norm;
    c.upper = s * rep.lipschitz_empirical * c.norm;
    const double tol = 1e-9 * std::max(1e-300, c.upper);
    std::vector<double> v(E.samples.size());
    for (std::size_t i = 0; i < E.samples.size(); ++i) {
      v[i] = tree_free_norm(*trees[tree_of[i]], pushforward(measures[k], E.samples[i]));
      if (v[i] < c.lower - tol) ++c.sample_lower_violations;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    c.mean = sum / M;
    double sq = 0.0;
    for (double x : v) sq += (x - c.mean) * (x - c.mean);
    c.stddev = v.size() > 1 ? std::sqrt(sq / (M - 1.0)) : 0.0;
    c.slack = 3.0 * c.stddev / std::sqrt(M);
    c.ok = c.sample_lower_violations == 0 && c.mean >= c.lower - c.slack - tol &&
           c.mean <= c.upper + c.slack + tol;
  });
  return rep;
}

}  // namespace stembed
