#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "stembed/errors.hpp"
#include "stembed/filling_tree.hpp"
#include "stembed/parallel.hpp"

namespace stembed {

namespace {

void check_height(const FillingPoint& a) {
  if (!(a.height > 0.0) || !std::isfinite(a.height)) {
    throw ArgumentError("filling heights must be positive and finite");
  }
}

}  // namespace

double rho_filling(const FiniteMetricSpace& Z, const FillingPoint& a, const FillingPoint& b) {
  check_height(a);
  check_height(b);
  if (a.base >= Z.size() || b.base >= Z.size()) throw ArgumentError("filling base out of range");
  const double top = std::max(a.height, b.height);
  return 2.0 * std::log((Z(a.base, b.base) + top) / std::sqrt(a.height * b.height));
}

FillingPoint lift_map_to_filling(const FiniteMetricSpace& Z, const FiniteMetricSpace& Y,
                                 std::span<const std::size_t> f, const FillingPoint& a) {
  check_height(a);
  const double slack = 1e-9 * Z.diameter();
  if (Z.diameter() > Y.diameter() + slack) {
    throw ArgumentError("lifting to fillings needs diam(source) <= diam(target)");
  }
  if (f.size() != Z.size()) throw ArgumentError("point map must cover the source space");
  if (a.base >= Z.size()) throw ArgumentError("filling base out of range");
  if (Z.size() > 1 && a.height > Z.diameter() + slack) {
    throw ArgumentError("filling height exceeds the diameter of the base space");
  }
  if (f[a.base] >= Y.size()) throw ArgumentError("point map leaves the target space");
  return FillingPoint{f[a.base], a.height};
}

LogStochasticConstants measure_log_stochastic(const FiniteMetricSpace& X,
                                              const StochasticEnsemble& E) {
  LogStochasticConstants c;
  if (X.size() < 2 || E.samples.empty()) {
    c.scaling = 1.0;
    c.distortion = 1.0;
    return c;
  }
  const auto stats = ensemble_statistics(X, E);
  c.scaling = std::numeric_limits<double>::infinity();
  for (const auto& st : stats) c.scaling = std::min(c.scaling, st.min_ratio);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& st : stats) {
    worst = std::max(worst, st.mean_log - std::log(c.scaling * st.distance));
  }
  c.distortion = std::exp(worst);
  return c;
}

StochasticEnsemble rescale_log_stochastic(const StochasticEnsemble& E, double s, double t,
                                          double alpha) {
  if (!(s > 0.0) || !(t > 0.0) || !(alpha > 0.0)) {
    throw ArgumentError("rescaling parameters must be positive");
  }
  StochasticEnsemble out;
  out.seed = E.seed;
  // A factor c with d_Y >= c * rho becomes s^{-1} (c/t)^alpha for rho^alpha.
  out.scaling = std::pow(E.scaling / t, alpha) / s;
  out.samples.reserve(E.samples.size());
  std::map<const FiniteMetricSpace*, std::shared_ptr<const FiniteMetricSpace>> done;
  for (const auto& sample : E.samples) {
    auto& target = done[sample.target.get()];
    if (!target) {
      const auto& U = *sample.target;
      std::vector<double> d(U.data().size());
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double v = U.data()[i];
        d[i] = v == 0.0 ? 0.0 : std::pow(v / t, alpha) / s;
      }
      target = std::make_shared<const FiniteMetricSpace>(U.size(), std::move(d), U.basepoint());
    }
    out.samples.push_back(SampledMap{sample.image, target});
  }
  return out;
}

FillingLiftCheck verify_filling_lift(const FiniteMetricSpace& X, const StochasticEnsemble& E,
                                     int height_levels, unsigned threads) {
  if (height_levels < 1) throw ArgumentError("need at least one height level");
  if (E.samples.empty()) throw ArgumentError("ensemble has no samples");
  FillingLiftCheck check;
  const std::size_t n = X.size();
  if (n < 2) return check;
  const auto stats = ensemble_statistics(X, E, threads);
  double worst = 0.0;
  for (const auto& st : stats) {
    if (st.min_ratio < 1.0 - 1e-9) {
      throw ArgumentError("filling lift needs an ensemble with scaling factor 1 (found ratio " +
                          std::to_string(st.min_ratio) + ")");
    }
    worst = std::max(worst, st.mean_log - std::log(st.distance));
  }
  check.log_distortion = std::exp(worst);
  const double log_d = 2.0 * worst;

  std::vector<FillingPoint> points;
  for (std::size_t x = 0; x < n; ++x) {
    for (int j = 0; j < height_levels; ++j) {
      points.push_back({x, X.diameter() * std::exp(-static_cast<double>(j))});
    }
  }
  check.filling_points = points.size();
  const std::size_t m = points.size();
  check.pairs = m * (m - 1) / 2;

  struct Row {
    std::size_t lower = 0, upper = 0, same = 0;
    double excess = -std::numeric_limits<double>::infinity();
  };
  std::vector<Row> rows(m);
  parallel_for(m, threads, [&](std::size_t a) {
    Row& row = rows[a];
    for (std::size_t b = a + 1; b < m; ++b) {
      const double rho_x = rho_filling(X, points[a], points[b]);
      const double tol = 1e-9 * (1.0 + std::abs(rho_x));
      double sum = 0.0, comp = 0.0;
      bool same_ok = true;
      for (const auto& sample : E.samples) {
        const auto& Y = *sample.target;
        const FillingPoint la = lift_map_to_filling(X, Y, sample.image, points[a]);
        const FillingPoint lb = lift_map_to_filling(X, Y, sample.image, points[b]);
        const double rho_y = rho_filling(Y, la, lb);
        if (rho_y < rho_x - tol) ++row.lower;
        if (points[a].base == points[b].base && rho_y != rho_x) same_ok = false;
        const double t = sum + rho_y;
        comp += std::abs(sum) >= std::abs(rho_y) ? (sum - t) + rho_y : (rho_y - t) + sum;
        sum = t;
      }
      const double mean = (sum + comp) / static_cast<double>(E.samples.size());
      if (mean > rho_x + log_d + tol) ++row.upper;
      if (!same_ok) ++row.same;
      row.excess = std::max(row.excess, mean - rho_x);
    }
  });
  check.max_excess = 0.0;
  for (const auto& row : rows) {
    check.lower_violations += row.lower;
    check.upper_violations += row.upper;
    check.same_base_mismatches += row.same;
    check.max_excess = std::max(check.max_excess, row.excess);
  }
  return check;
}

}  // namespace stembed
