#include "stembed/nagata_embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "stembed/errors.hpp"

namespace stembed {

namespace {

template <class Fn>
void merge_visit(const SparseVector& a, const SparseVector& b, Fn&& fn) {
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].coord < b[j].coord)) {
      fn(a[i].value, 0.0);
      ++i;
    } else if (i == a.size() || b[j].coord < a[i].coord) {
      fn(0.0, b[j].value);
      ++j;
    } else {
      fn(a[i].value, b[j].value);
      ++i;
      ++j;
    }
  }
}

double set_diameter(const FiniteMetricSpace& X, const std::vector<std::size_t>& s) {
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) d = std::max(d, X(s[i], s[j]));
  }
  return d;
}

}  // namespace

double sup_distance(const SparseVector& a, const SparseVector& b) {
  double m = 0.0;
  merge_visit(a, b, [&](double x, double y) { m = std::max(m, std::abs(x - y)); });
  return m;
}

double lp_distance(const SparseVector& a, const SparseVector& b, double p) {
  double s = 0.0;
  merge_visit(a, b, [&](double x, double y) { s += std::pow(std::abs(x - y), p); });
  return std::pow(s, 1.0 / p);
}

std::size_t union_support(const SparseVector& a, const SparseVector& b) {
  std::size_t n = 0;
  merge_visit(a, b, [&](double, double) { ++n; });
  return n;
}

std::string CoordinateKey::str() const {
  std::string s = "s" + std::to_string(scale) + ":m" + std::to_string(member);
  if (sign > 0) s += ":+";
  if (sign < 0) s += ":-";
  return s;
}

std::size_t SparseVectorEmbedding::max_support() const {
  std::size_t m = 0;
  for (const auto& v : images) m = std::max(m, v.size());
  return m;
}

NagataCover build_nagata_cover(const FiniteMetricSpace& X, double s, std::size_t max_colors) {
  const auto order = identity_order(X.size());
  return build_nagata_cover(X, s, max_colors, order);
}

NagataCover build_nagata_cover(const FiniteMetricSpace& X, double s, std::size_t max_colors,
                               std::span<const std::size_t> order) {
  if (!(s > 0.0)) throw ArgumentError("cover scale must be positive");
  if (max_colors == 0) throw ArgumentError("max_colors must be positive");
  const std::size_t n = X.size();
  NagataCover cover;
  cover.scale = s;
  cover.gamma = 2.0;
  cover.centers = greedy_maximal_net(X, s, order);
  const std::size_t m = cover.centers.size();

  // Nearest centre, ties to the earlier centre in net order.
  std::vector<std::size_t> cell(n);
  cover.members.assign(m, {});
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < m; ++c) {
      if (X(x, cover.centers[c]) < X(x, cover.centers[best])) best = c;
    }
    cell[x] = best;
    cover.members[best].push_back(x);
  }

  std::vector<char> conflict(m * m, 0);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      if (cell[x] != cell[y] && X(x, y) <= s) {
        conflict[cell[x] * m + cell[y]] = conflict[cell[y] * m + cell[x]] = 1;
      }
    }
  }
  cover.colors.assign(m, 0);
  std::size_t used = 0;
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<char> taken(used + 1, 0);
    for (std::size_t o = 0; o < c; ++o) {
      if (conflict[c * m + o]) taken[cover.colors[o]] = 1;
    }
    std::size_t color = 0;
    while (taken[color]) ++color;
    cover.colors[c] = color;
    used = std::max(used, color + 1);
    if (used > max_colors) {
      throw CapacityError("Nagata cover at scale " + std::to_string(s) + " needs more than " +
                          std::to_string(max_colors) + " colors");
    }
  }
  cover.dimension = used - 1;
  return cover;
}

CoverCheck verify_nagata_cover(const FiniteMetricSpace& X, const NagataCover& cover,
                               CoverCheckMode mode) {
  const std::size_t n = X.size();
  const double tol = default_metric_tol(X);
  const double s = cover.scale;
  CoverCheck result;

  std::vector<std::vector<std::size_t>> member_of(n);
  for (std::size_t c = 0; c < cover.members.size(); ++c) {
    for (std::size_t x : cover.members[c]) {
      if (x >= n) {
        result.ok = false;
        result.reason = "member " + std::to_string(c) + " has an out-of-range point";
        result.witness = cover.members[c];
        return result;
      }
      member_of[x].push_back(c);
    }
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (member_of[x].empty()) {
      result.ok = false;
      result.reason = "point " + std::to_string(x) + " is not covered";
      result.witness = {x};
      return result;
    }
  }
  for (std::size_t c = 0; c < cover.members.size(); ++c) {
    const double diam = set_diameter(X, cover.members[c]);
    if (diam > cover.gamma * s + tol) {
      result.ok = false;
      result.reason = "member " + std::to_string(c) + " has diameter " + std::to_string(diam) +
                      " > gamma*s = " + std::to_string(cover.gamma * s);
      result.witness = cover.members[c];
      return result;
    }
  }

  std::vector<std::size_t> stamp(cover.members.size(), 0);
  std::size_t epoch = 0;
  auto multiplicity = [&](const std::vector<std::size_t>& A) {
    ++epoch;
    std::size_t count = 0;
    for (std::size_t x : A) {
      for (std::size_t c : member_of[x]) {
        if (stamp[c] != epoch) {
          stamp[c] = epoch;
          ++count;
        }
      }
    }
    return count;
  };
  auto test = [&](const std::vector<std::size_t>& A) {
    const std::size_t m = multiplicity(A);
    result.max_multiplicity = std::max(result.max_multiplicity, m);
    if (m > cover.dimension + 1 && result.ok) {
      result.ok = false;
      result.reason = "a set of diameter <= s meets " + std::to_string(m) + " members (> n+1 = " +
                      std::to_string(cover.dimension + 1) + ")";
      result.witness = A;
    }
    return result.ok;
  };

  if (mode == CoverCheckMode::exhaustive) {
    if (n > 20) throw ResourceError("exhaustive cover check is limited to 20 points");
    // Depth-first enumeration of all cliques of the graph d <= s.
    std::vector<std::size_t> current;
    auto extend = [&](auto&& self, std::size_t start) -> bool {
      for (std::size_t y = start; y < n; ++y) {
        bool fits = true;
        for (std::size_t a : current) {
          if (X(a, y) > s) {
            fits = false;
            break;
          }
        }
        if (!fits) continue;
        current.push_back(y);
        if (!test(current) || !self(self, y + 1)) return false;
        current.pop_back();
      }
      return true;
    };
    extend(extend, 0);
    return result;
  }

  for (std::size_t x = 0; x < n; ++x) {
    if (!test({x})) return result;
  }
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      if (X(x, y) > s) continue;
      if (!test({x, y})) return result;
      for (std::size_t z = y + 1; z < n; ++z) {
        if (X(x, z) <= s && X(y, z) <= s && !test({x, y, z})) return result;
      }
    }
  }
  // Grow a clique around each point, preferring points that bring new members.
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<std::size_t> cand;
    for (std::size_t y = 0; y < n; ++y) {
      if (y != x && X(x, y) <= s) cand.push_back(y);
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return X(x, a) < X(x, b); });
    std::vector<std::size_t> A{x};
    std::vector<char> used(cand.size(), 0);
    while (true) {
      std::size_t best = cand.size(), best_gain = 0;
      const std::size_t base = multiplicity(A);
      for (std::size_t i = 0; i < cand.size(); ++i) {
        if (used[i]) continue;
        bool fits = true;
        for (std::size_t a : A) {
          if (X(a, cand[i]) > s) {
            fits = false;
            break;
          }
        }
        if (!fits) {
          used[i] = 1;
          continue;
        }
        A.push_back(cand[i]);
        const std::size_t gain = multiplicity(A) - base;
        A.pop_back();
        if (best == cand.size() || gain > best_gain) {
          best = i;
          best_gain = gain;
        }
      }
      if (best == cand.size()) break;
      used[best] = 1;
      A.push_back(cand[best]);
    }
    if (!test(A)) return result;
  }
  return result;
}

ThresholdMap threshold_map(const FiniteMetricSpace& X, double t, double gamma, int scale_label,
                           std::size_t max_colors) {
  if (!(t > 0.0)) throw ArgumentError("threshold must be positive");
  if (!(gamma >= 1.0)) throw ArgumentError("cover constant gamma must be at least 1");
  const std::size_t n = X.size();
  ThresholdMap tm;
  tm.threshold = t;
  tm.cover = build_nagata_cover(X, t / (2.0 * gamma), max_colors);
  tm.cover.gamma = gamma;
  for (const auto& member : tm.cover.members) {
    if (set_diameter(X, member) > gamma * tm.cover.scale + default_metric_tol(X)) {
      throw CapacityError("cover at threshold " + std::to_string(t) +
                          " does not meet the requested constant gamma = " +
                          std::to_string(gamma));
    }
  }
  const std::size_t m = tm.cover.members.size();
  const double height = t / (4.0 * gamma);

  std::vector<double> raw(n * m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t x = 0; x < n; ++x) {
      double dist = std::numeric_limits<double>::infinity();
      for (std::size_t y : tm.cover.members[c]) dist = std::min(dist, X(x, y));
      raw[x * m + c] = std::max(0.0, height - dist);
    }
  }
  auto& emb = tm.embedding;
  emb.keys.resize(m);
  for (std::size_t c = 0; c < m; ++c) emb.keys[c] = CoordinateKey{scale_label, c, 0};
  emb.images.resize(n);
  const std::size_t p = X.basepoint();
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t c = 0; c < m; ++c) {
      const double v = raw[x * m + c] - raw[p * m + c];
      if (v != 0.0) emb.images[x].push_back({c, v});
    }
  }
  emb.support_bound = 2 * (tm.cover.dimension + 1);
  return tm;
}

std::vector<ThresholdMap> threshold_embedding(const FiniteMetricSpace& X,
                                              std::span<const double> thresholds, double gamma,
                                              std::size_t max_colors) {
  std::vector<ThresholdMap> maps;
  maps.reserve(thresholds.size());
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    maps.push_back(threshold_map(X, thresholds[i], gamma, static_cast<int>(i), max_colors));
  }
  return maps;
}

std::pair<int, int> required_scale_range(const FiniteMetricSpace& X) {
  if (X.size() < 2) return {0, 0};
  return {static_cast<int>(std::floor(std::log2(X.min_distance()))) - 1,
          static_cast<int>(std::ceil(std::log2(X.diameter())))};
}

AssouadEmbedding assouad_embedding(const FiniteMetricSpace& X, double alpha,
                                   std::optional<std::pair<int, int>> scale_range, double gamma,
                                   std::size_t max_colors) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("Assouad exponent must lie in (0,1)");
  const auto required = required_scale_range(X);
  const auto range = scale_range.value_or(required);
  if (range.first > required.first || range.second < required.second) {
    throw ArgumentError("scale range [" + std::to_string(range.first) + ", " +
                        std::to_string(range.second) + "] must contain [" +
                        std::to_string(required.first) + ", " + std::to_string(required.second) +
                        "]");
  }
  const std::size_t n = X.size();
  AssouadEmbedding A;
  A.alpha = alpha;
  A.gamma = gamma;
  A.n_min = range.first;
  A.n_max = range.second;

  std::vector<std::map<std::size_t, double>> rows(n);
  for (int e = range.first; e <= range.second && n > 1; ++e) {
    const double t = std::ldexp(1.0, e);
    const ThresholdMap tm = threshold_map(X, t, gamma, e, max_colors);
    A.max_dimension = std::max(A.max_dimension, tm.cover.dimension);
    A.threshold_support = std::max(A.threshold_support, tm.embedding.support_bound);
    // 4 gamma normalizes the threshold map to scaling factor 1.
    const double weight = std::pow(2.0, e * (alpha - 1.0)) * 4.0 * gamma;
    const std::size_t offset = A.raw.keys.size();
    A.raw.keys.insert(A.raw.keys.end(), tm.embedding.keys.begin(), tm.embedding.keys.end());
    for (std::size_t x = 0; x < n; ++x) {
      for (const auto& entry : tm.embedding.images[x]) {
        rows[x][offset + entry.coord] = weight * entry.value;
      }
    }
  }
  A.raw.images.resize(n);
  A.unit.images.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (const auto& [c, v] : rows[x]) {
      A.raw.images[x].push_back({c, v});
    }
  }
  A.scale = 0.0;
  for (const auto& img : A.raw.images) {
    for (const auto& e : img) A.scale = std::max(A.scale, std::abs(e.value));
  }
  if (A.scale == 0.0) A.scale = 1.0;
  A.raw.support_bound = A.raw.max_support();

  A.unit.keys.reserve(2 * A.raw.keys.size());
  for (const auto& k : A.raw.keys) {
    A.unit.keys.push_back({k.scale, k.member, +1});
    A.unit.keys.push_back({k.scale, k.member, -1});
  }
  for (std::size_t x = 0; x < n; ++x) {
    for (const auto& e : A.raw.images[x]) {
      const double v = std::min(1.0, std::abs(e.value) / A.scale);
      A.unit.images[x].push_back({2 * e.coord + (e.value > 0 ? 0 : 1), v});
    }
  }
  A.unit.support_bound = A.unit.max_support();

  const double C = std::max(4.0 * gamma, 1.0);
  const double two_a = std::pow(2.0, alpha);
  A.lower_constant = 1.0 / two_a;
  A.sup_upper_constant = C * two_a;
  const double A1 = 2.0 * static_cast<double>(std::max<std::size_t>(A.threshold_support, 1));
  A.l1_upper_constant =
      A1 * C * (1.0 / (1.0 - 1.0 / two_a) + two_a / (1.0 - std::pow(2.0, alpha - 1.0)));
  return A;
}

double lp_smallness_constant(const SparseVectorEmbedding& E, double p) {
  if (!(p > 0.0)) throw ArgumentError("p must be positive");
  if (E.size() < 2) throw ArgumentError("smallness constant needs at least two points");
  double best = 1.0;
  for (std::size_t x = 0; x < E.size(); ++x) {
    for (std::size_t y = x + 1; y < E.size(); ++y) {
      const double sup = sup_distance(E.images[x], E.images[y]);
      if (sup == 0.0) continue;
      double s = 0.0;
      merge_visit(E.images[x], E.images[y],
                  [&](double a, double b) { s += std::pow(std::abs(a - b) / sup, p); });
      best = std::max(best, std::pow(s, 1.0 / p));
    }
  }
  return best;
}

PartitionOfUnity partition_of_unity(const FiniteMetricSpace& X,
                                    std::span<const std::size_t> net, double s, double lambda) {
  if (!(s > 0.0)) throw ArgumentError("scale must be positive");
  if (!(lambda >= 1.5)) throw ArgumentError("support factor lambda must be at least 1.5");
  if (net.empty()) throw ArgumentError("net must be nonempty");
  const std::size_t n = X.size();
  for (std::size_t a : net) {
    if (a >= n) throw ArgumentError("net index out of range");
  }
  for (std::size_t x = 0; x < n; ++x) {
    bool near = false;
    for (std::size_t a : net) near = near || X(x, a) <= s;
    if (!near) {
      throw ArgumentError("net is not maximal at scale s: point " + std::to_string(x) +
                          " is farther than s from it");
    }
  }
  PartitionOfUnity P;
  P.scale = s;
  P.lambda = lambda;
  P.net.assign(net.begin(), net.end());
  const double radius = (lambda - 0.5) * s;
  const std::size_t m = net.size();
  P.weights.assign(n, std::vector<double>(m, 0.0));
  std::vector<double> bump(n * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t x = 0; x < n; ++x) {
      double dist = std::numeric_limits<double>::infinity();
      for (std::size_t y = 0; y < n; ++y) {
        if (X(net[i], y) <= radius) dist = std::min(dist, X(x, y));
      }
      bump[x * m + i] = std::max(0.0, 1.0 - 2.0 * dist / s);
    }
  }
  for (std::size_t x = 0; x < n; ++x) {
    double total = 0.0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < m; ++i) {
      total += bump[x * m + i];
      active += bump[x * m + i] > 0.0;
    }
    if (!(total > 0.0)) {
      throw InternalError("no bump covers point " + std::to_string(x));
    }
    P.max_overlap = std::max(P.max_overlap, active);
    for (std::size_t i = 0; i < m; ++i) P.weights[x][i] = bump[x * m + i] / total;
  }
  P.lipschitz_factor = 2.0 * (1.0 + 2.0 * static_cast<double>(P.max_overlap));
  return P;
}

}  // namespace stembed
