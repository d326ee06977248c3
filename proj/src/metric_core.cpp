#include "stembed/metric_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "stembed/errors.hpp"

namespace stembed {

namespace {

std::string entry_name(std::size_t i, std::size_t j) {
  std::ostringstream os;
  os << "(row " << i << ", col " << j << ")";
  return os.str();
}

void check_index(const FiniteMetricSpace& X, std::size_t i) {
  if (i >= X.size()) {
    throw ArgumentError("point index " + std::to_string(i) + " out of range for size " +
                        std::to_string(X.size()));
  }
}

}  // namespace

FiniteMetricSpace::FiniteMetricSpace(std::size_t size, std::vector<double> dist,
                                     std::size_t basepoint)
    : n_(size), d_(std::move(dist)), basepoint_(basepoint) {
  if (n_ == 0) throw ArgumentError("metric space must have at least one point");
  if (d_.size() != n_ * n_) {
    throw ArgumentError("distance matrix has " + std::to_string(d_.size()) +
                        " entries, expected " + std::to_string(n_ * n_));
  }
  if (basepoint_ >= n_) {
    throw ArgumentError("basepoint " + std::to_string(basepoint_) + " out of range");
  }
  dmin_ = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      const double v = d_[i * n_ + j];
      if (!std::isfinite(v)) throw ArgumentError("non-finite distance at " + entry_name(i, j));
      if (i == j) {
        if (v != 0.0) throw ArgumentError("nonzero diagonal at " + entry_name(i, j));
        continue;
      }
      if (v <= 0.0) throw ArgumentError("nonpositive distance at " + entry_name(i, j));
      if (v != d_[j * n_ + i]) throw ArgumentError("asymmetric distance at " + entry_name(i, j));
      diam_ = std::max(diam_, v);
      dmin_ = std::min(dmin_, v);
    }
  }
  if (n_ == 1) dmin_ = 0.0;
}

FiniteMetricSpace FiniteMetricSpace::from_rows(const std::vector<std::vector<double>>& rows,
                                               std::size_t basepoint) {
  const std::size_t n = rows.size();
  std::vector<double> d;
  d.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) {
      throw ArgumentError("row " + std::to_string(i) + " has " +
                          std::to_string(rows[i].size()) + " entries, expected " +
                          std::to_string(n));
    }
    d.insert(d.end(), rows[i].begin(), rows[i].end());
  }
  return FiniteMetricSpace(n, std::move(d), basepoint);
}

FiniteMetricSpace FiniteMetricSpace::with_basepoint(std::size_t p) const {
  return FiniteMetricSpace(n_, d_, p);
}

double default_metric_tol(const FiniteMetricSpace& X) { return 1e-9 * X.diameter(); }

std::optional<TriangleViolation> find_triangle_violation(const FiniteMetricSpace& X,
                                                         double tol) {
  const std::size_t n = X.size();
  std::optional<TriangleViolation> worst;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      const double dik = X(i, k);
      for (std::size_t j = 0; j < n; ++j) {
        const double excess = dik - (X(i, j) + X(j, k));
        if (excess > tol && (!worst || excess > worst->excess)) {
          worst = TriangleViolation{i, j, k, excess};
        }
      }
    }
  }
  return worst;
}

std::optional<TriangleViolation> find_triangle_violation(const FiniteMetricSpace& X) {
  return find_triangle_violation(X, default_metric_tol(X));
}

double gromov_product(const FiniteMetricSpace& X, std::size_t x, std::size_t y,
                      std::size_t p) {
  check_index(X, x);
  check_index(X, y);
  check_index(X, p);
  return 0.5 * (X(x, p) + X(p, y) - X(x, y));
}

double hyperbolicity_delta(const FiniteMetricSpace& X) {
  const std::size_t n = X.size();
  std::vector<double> g(n * n);
  double delta = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        g[x * n + y] = 0.5 * (X(x, p) + X(p, y) - X(x, y));
      }
    }
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        const double gxy = g[x * n + y];
        for (std::size_t z = 0; z < n; ++z) {
          delta = std::max(delta, std::min(gxy, g[y * n + z]) - g[x * n + z]);
        }
      }
    }
  }
  return delta;
}

std::optional<FourPointWitness> find_four_point_violation(const FiniteMetricSpace& X,
                                                          double tol) {
  // Quadruples with a repeated point reduce to the triangle inequality.
  if (auto t = find_triangle_violation(X, tol)) {
    return FourPointWitness{{t->j, t->j, t->i, t->k}, t->excess};
  }
  const std::size_t n = X.size();
  for (std::size_t w = 0; w < n; ++w) {
    for (std::size_t x = w + 1; x < n; ++x) {
      for (std::size_t y = x + 1; y < n; ++y) {
        for (std::size_t z = y + 1; z < n; ++z) {
          // The condition over all orderings says the largest of the three
          // pair sums is at most the second largest (plus tol).
          const double s[3] = {X(w, x) + X(y, z), X(w, y) + X(x, z), X(w, z) + X(x, y)};
          int top = 0;
          for (int i = 1; i < 3; ++i) {
            if (s[i] > s[top]) top = i;
          }
          const double second = std::max(s[(top + 1) % 3], s[(top + 2) % 3]);
          const double excess = s[top] - second;
          if (excess > tol) {
            std::array<std::size_t, 4> q;
            if (top == 0) q = {w, x, y, z};
            else if (top == 1) q = {w, y, x, z};
            else q = {w, z, x, y};
            return FourPointWitness{q, excess};
          }
        }
      }
    }
  }
  return std::nullopt;
}

bool check_four_point(const FiniteMetricSpace& X, double tol) {
  if (tol < 0) throw ArgumentError("tolerance must be nonnegative");
  return !find_four_point_violation(X, tol).has_value();
}

bool is_ultrametric(const FiniteMetricSpace& X, double tol) {
  if (tol < 0) throw ArgumentError("tolerance must be nonnegative");
  const std::size_t n = X.size();
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t w = u + 1; w < n; ++w) {
      const double duw = X(u, w);
      for (std::size_t v = 0; v < n; ++v) {
        if (duw > std::max(X(u, v), X(v, w)) + tol) return false;
      }
    }
  }
  return true;
}

FiniteMetricSpace snowflake(const FiniteMetricSpace& X, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ArgumentError("snowflake exponent must lie in (0,1]");
  }
  return apply_distortion(X, DistortionFunction::power(alpha));
}

DistortionFunction DistortionFunction::power(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ArgumentError("power distortion exponent must lie in (0,1]");
  }
  return DistortionFunction(Kind::power, alpha);
}

DistortionFunction DistortionFunction::omega(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw ArgumentError("omega_p requires finite p >= 1");
  }
  return DistortionFunction(Kind::omega_p, p);
}

double DistortionFunction::operator()(double t) const {
  if (t < 0.0) throw ArgumentError("distortion functions are defined on [0, inf)");
  if (t == 0.0) return 0.0;
  if (kind_ == Kind::power) return param_ == 1.0 ? t : std::pow(t, param_);
  const double p = param_;
  const double knee = std::exp(-p - 1.0);
  if (t <= knee) return 1.0 / std::log(1.0 / t);
  return std::pow((p * std::exp(p + 1.0) * t + 1.0) / std::pow(p + 1.0, p + 1.0), 1.0 / p);
}

std::string DistortionFunction::describe() const {
  std::ostringstream os;
  os << (kind_ == Kind::power ? "power(" : "omega_p(") << param_ << ")";
  return os.str();
}

FiniteMetricSpace apply_distortion(const FiniteMetricSpace& X,
                                   const DistortionFunction& omega) {
  std::vector<double> d(X.data().size());
  std::transform(X.data().begin(), X.data().end(), d.begin(),
                 [&](double t) { return omega(t); });
  return FiniteMetricSpace(X.size(), std::move(d), X.basepoint());
}

bool check_p_concave(const DistortionFunction& omega, double p,
                     std::span<const double> grid, double tol) {
  if (grid.size() < 3) throw ArgumentError("p-concavity check needs at least 3 grid points");
  if (!(p > 0.0)) throw ArgumentError("p must be positive");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw ArgumentError("grid must be positive and strictly increasing");
    }
  }
  std::vector<double> slope(grid.size() - 1);
  double scale = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = std::pow(omega(grid[i]), p);
    const double b = std::pow(omega(grid[i + 1]), p);
    slope[i] = (b - a) / (grid[i + 1] - grid[i]);
    scale = std::max(scale, std::abs(slope[i]));
  }
  for (std::size_t i = 1; i < slope.size(); ++i) {
    if (slope[i] > slope[i - 1] + tol * scale) return false;
  }
  return true;
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

std::vector<std::size_t> basepoint_first_order(const FiniteMetricSpace& X) {
  std::vector<std::size_t> order;
  order.reserve(X.size());
  order.push_back(X.basepoint());
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (i != X.basepoint()) order.push_back(i);
  }
  return order;
}

std::vector<std::size_t> greedy_maximal_net(const FiniteMetricSpace& X, double theta,
                                            std::span<const std::size_t> order) {
  if (!(theta > 0.0)) throw ArgumentError("net separation must be positive");
  if (order.size() != X.size()) throw ArgumentError("order must be a permutation of the points");
  std::vector<char> seen(X.size(), 0);
  for (std::size_t i : order) {
    if (i >= X.size() || seen[i]) throw ArgumentError("order must be a permutation of the points");
    seen[i] = 1;
  }
  std::vector<std::size_t> net;
  for (std::size_t i : order) {
    bool separated = true;
    for (std::size_t a : net) {
      if (!(X(i, a) > theta)) {
        separated = false;
        break;
      }
    }
    if (separated) net.push_back(i);
  }
  return net;
}

std::vector<std::size_t> greedy_maximal_net(const FiniteMetricSpace& X, double theta) {
  const auto order = identity_order(X.size());
  return greedy_maximal_net(X, theta, order);
}

}  // namespace stembed
