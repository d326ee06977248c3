#include <algorithm>
#include <cmath>

#include "stembed/errors.hpp"
#include "stembed/filling_tree.hpp"

namespace stembed {

namespace {

constexpr std::size_t kMaxFourPointNodes = 320;

}  // namespace

int ceil_log_level(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ArgumentError("level of a nonpositive value");
  int k = static_cast<int>(std::ceil(std::log(x)));
  while (std::exp(static_cast<double>(k - 1)) >= x) --k;
  while (std::exp(static_cast<double>(k)) < x) ++k;
  return k;
}

int floor_log_level(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ArgumentError("level of a nonpositive value");
  int k = static_cast<int>(std::floor(std::log(x)));
  while (std::exp(static_cast<double>(k)) > x) --k;
  while (std::exp(static_cast<double>(k + 1)) <= x) ++k;
  return k;
}

NetHierarchy::NetHierarchy(const FiniteMetricSpace& U) : U_(U) {
  if (!is_ultrametric(U_, 0.0)) throw ArgumentError("net hierarchy needs an ultrametric");
  const std::size_t n = U_.size();
  if (n < 2) {
    nets_.push_back({0});
    proj_.push_back({0});
    return;
  }
  k0_ = ceil_log_level(U_.diameter());
  kmin_ = floor_log_level(U_.min_distance()) - 1;
  const auto order = basepoint_first_order(U_);
  for (int k = k0_; k >= kmin_; --k) {
    const double r = std::exp(static_cast<double>(k));
    auto net = greedy_maximal_net(U_, r, order);
    std::vector<std::size_t> proj(n);
    for (std::size_t u = 0; u < n; ++u) {
      std::size_t hits = 0;
      for (std::size_t a : net) {
        if (U_(u, a) <= r) {
          proj[u] = a;
          ++hits;
        }
      }
      if (hits != 1) throw InternalError("net projection is not unique at level " + std::to_string(k));
    }
    nets_.push_back(std::move(net));
    proj_.push_back(std::move(proj));
  }
  if (nets_.front().size() != 1 || nets_.back().size() != n) {
    throw InternalError("net hierarchy does not run from one point to all points");
  }
  // projections must compose along the tower
  for (std::size_t j = 0; j < proj_.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      for (std::size_t u = 0; u < n; ++u) {
        if (proj_[i][proj_[j][u]] != proj_[i][u]) throw InternalError("net projections do not compose");
      }
    }
  }
}

const std::vector<std::size_t>& NetHierarchy::net(int k) const {
  if (k >= k0_) return nets_.front();
  if (k <= kmin_) return nets_.back();
  return nets_[static_cast<std::size_t>(k0_ - k)];
}

std::size_t NetHierarchy::project(int k, std::size_t u) const {
  if (u >= U_.size()) throw ArgumentError("point out of range");
  if (k < kmin_) return u;
  if (k >= k0_) return proj_.front()[u];
  return proj_[static_cast<std::size_t>(k0_ - k)][u];
}

std::vector<NetNode> NetHierarchy::nodes() const {
  std::vector<NetNode> out;
  for (int k = k0_; k >= kmin_; --k) {
    for (std::size_t u : net(k)) out.push_back({k, u});
  }
  return out;
}

NetHierarchy build_net_hierarchy(const FiniteMetricSpace& U) { return NetHierarchy(U); }

int merge_level(const NetHierarchy& H, const NetNode& x, const NetNode& y) {
  int k = std::max(x.level, y.level);
  while (H.project(k, x.point) != H.project(k, y.point)) {
    if (k >= H.top_level()) throw InternalError("projections never merge");
    ++k;
  }
  return k;
}

long net_tree_metric(const NetHierarchy& H, const NetNode& x, const NetNode& y) {
  const long k = merge_level(H, x, y);
  return 2 * k - x.level - y.level;
}

double node_filling_distance(const NetHierarchy& H, const NetNode& x, const NetNode& y) {
  const double d = H.space()(x.point, y.point);
  const double top = std::exp(static_cast<double>(std::max(x.level, y.level)));
  return 2.0 * (std::log(d + top) - 0.5 * (x.level + y.level));
}

std::optional<std::array<NetNode, 4>> find_net_four_point_violation(
    const NetHierarchy& H, std::span<const NetNode> nodes) {
  const std::size_t m = nodes.size();
  if (m > kMaxFourPointNodes) {
    throw ResourceError("four-point check limited to " + std::to_string(kMaxFourPointNodes) +
                        " nodes, got " + std::to_string(m));
  }
  std::vector<long> K(m * m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      K[a * m + b] = K[b * m + a] = merge_level(H, nodes[a], nodes[b]);
    }
  }
  // w <= x <= y <= z covers the degenerate (triangle) cases too
  for (std::size_t w = 0; w < m; ++w) {
    for (std::size_t x = w; x < m; ++x) {
      for (std::size_t y = x; y < m; ++y) {
        for (std::size_t z = y; z < m; ++z) {
          long s[3] = {K[w * m + x] + K[y * m + z], K[w * m + y] + K[x * m + z],
                       K[w * m + z] + K[x * m + y]};
          std::sort(s, s + 3);
          if (s[2] > s[1]) return std::array<NetNode, 4>{nodes[w], nodes[x], nodes[y], nodes[z]};
        }
      }
    }
  }
  return std::nullopt;
}

NetNode project_to_net(const NetHierarchy& H, const FillingPoint& a) {
  if (!(a.height > 0.0)) throw ArgumentError("filling heights must be positive");
  if (a.base >= H.space().size()) throw ArgumentError("filling base out of range");
  int k = floor_log_level(a.height);
  if (k > H.top_level()) throw ArgumentError("height above the top of the hierarchy");
  return NetNode{k, H.project(k, a.base)};
}

}  // namespace stembed
