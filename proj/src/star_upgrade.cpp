#include <algorithm>
#include <cmath>
#include <limits>

#include "stembed/errors.hpp"
#include "stembed/filling_tree.hpp"

namespace stembed {

namespace {

// first net point (in net order) within twice the distance to the net
std::vector<std::size_t> nearest_projection(const FiniteMetricSpace& M,
                                            const std::vector<std::size_t>& net) {
  std::vector<std::size_t> proj(M.size());
  for (std::size_t x = 0; x < M.size(); ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a : net) best = std::min(best, M(x, a));
    for (std::size_t a : net) {
      if (M(x, a) <= 2.0 * best) {
        proj[x] = a;
        break;
      }
    }
  }
  return proj;
}

}  // namespace

RoughConstants measure_rough_constants(const FiniteMetricSpace& X, const StochasticEnsemble& E) {
  RoughConstants c;
  c.measured = true;
  if (X.size() < 2 || E.samples.empty()) {
    c.additive = X.size() < 2 ? 1.0 : X.min_distance() / 4.0;
    return c;
  }
  double k = 0.0;
  const std::size_t n = X.size();
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      double sum = 0.0;
      for (const auto& s : E.samples) {
        const double d = s.distance(x, y);
        k = std::max(k, X(x, y) - d);
        sum += d;
      }
      k = std::max(k, sum / static_cast<double>(E.samples.size()) - X(x, y));
    }
  }
  c.additive = k > 0.0 ? k : X.min_distance() / 4.0;
  return c;
}

StarUpgrade star_upgrade(const FiniteMetricSpace& X, double theta, const StochasticEnsemble& E,
                         std::optional<RoughConstants> constants) {
  const std::size_t n = X.size();
  if (!(theta > 0.0)) throw ArgumentError("separation theta must be positive");
  if (n >= 2 && !(X.min_distance() > theta)) {
    throw ArgumentError("source points must be more than theta apart");
  }
  if (E.samples.empty()) throw ArgumentError("ensemble has no samples");
  const FiniteMetricSpace* tree = E.samples.front().target.get();
  const std::size_t q = E.samples.front().image[X.basepoint()];
  for (const auto& s : E.samples) {
    if (s.target.get() != tree) throw ArgumentError("all samples must share one target tree");
    if (s.image.size() != n) throw ArgumentError("sample image has the wrong size");
    if (s.image[X.basepoint()] != q) throw ArgumentError("samples must fix the basepoint image");
  }

  RoughConstants c = constants ? *constants : measure_rough_constants(X, E);
  if (!(c.contraction > 0.0) || !(c.expansion > 0.0) || !(c.additive > 0.0)) {
    throw ArgumentError("rough constants must be positive");
  }
  // multiply the tree metric by D' so the contraction constant becomes 1
  const double factor = c.contraction;
  c.expansion *= factor;
  c.additive *= factor;
  c.contraction = 1.0;
  const double K = c.additive;

  std::vector<double> td(tree->data().begin(), tree->data().end());
  if (factor != 1.0) {
    for (double& v : td) v *= factor;
  }
  const FiniteMetricSpace T(tree->size(), std::move(td), q);

  StarUpgrade U{theta, c, {}, {}, {}, {}, 0.0, 0.0, {}, {}, FiniteMetricSpace(1, {0.0}, 0)};
  U.net_x = greedy_maximal_net(X, 2.0 * K, basepoint_first_order(X));
  U.net_t = greedy_maximal_net(T, K / 6.0, basepoint_first_order(T));
  U.proj_x = nearest_projection(X, U.net_x);
  U.proj_t = nearest_projection(T, U.net_t);
  U.lower_factor = std::min(1.0 / (8.0 * K), 1.0 / 30.0);
  U.expansion_bound = 1.0 / theta + (c.expansion + 5.0 / 6.0) * (1.0 + 4.0 * K / theta);

  const std::size_t m = U.net_t.size();
  std::vector<std::size_t> pos(T.size(), 0);
  for (std::size_t i = 0; i < m; ++i) pos[U.net_t[i]] = i;

  U.ensemble.seed = E.seed;
  U.ensemble.scaling = U.lower_factor;
  for (const auto& s : E.samples) {
    std::vector<std::size_t> lab(n);
    for (std::size_t x = 0; x < n; ++x) lab[x] = pos[U.proj_t[s.image[U.proj_x[x]]]];
    std::vector<double> d(n * n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = x + 1; y < n; ++y) {
        d[x * n + y] = d[y * n + x] = 1.0 + T(U.net_t[lab[x]], U.net_t[lab[y]]);
      }
    }
    SampledMap sm;
    sm.image = identity_order(n);
    sm.target = std::make_shared<const FiniteMetricSpace>(n, std::move(d), X.basepoint());
    U.ensemble.samples.push_back(std::move(sm));
    U.labels.push_back(std::move(lab));
  }

  const std::size_t L = std::min<std::size_t>(n, 4);
  const std::size_t sz = L * m;
  std::vector<double> d(sz * sz, 0.0);
  for (std::size_t a = 0; a < sz; ++a) {
    for (std::size_t b = a + 1; b < sz; ++b) {
      d[a * sz + b] = d[b * sz + a] = 1.0 + T(U.net_t[a % m], U.net_t[b % m]);
    }
  }
  U.star_model = FiniteMetricSpace(sz, std::move(d), 0);
  return U;
}

}  // namespace stembed
