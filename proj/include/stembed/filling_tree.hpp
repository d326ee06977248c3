#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stembed/metric_core.hpp"
#include "stembed/stochastic_ultra.hpp"

namespace stembed {

struct FillingPoint {
  std::size_t base = 0;
  double height = 1.0;
};

// 2 log((d(z,z') + max(h,h')) / sqrt(h h')).
double rho_filling(const FiniteMetricSpace& Z, const FillingPoint& a, const FillingPoint& b);

// (f(z), h). Requires diam(Z) <= diam(Y) and a valid height for Z.
FillingPoint lift_map_to_filling(const FiniteMetricSpace& Z, const FiniteMetricSpace& Y,
                                 std::span<const std::size_t> f, const FillingPoint& a);

struct LogStochasticConstants {
  double scaling = 0.0;     // min over samples and pairs of d_Y / d_X
  double distortion = 0.0;  // max over pairs of exp(E log d_Y - log(scaling d_X))
};

LogStochasticConstants measure_log_stochastic(const FiniteMetricSpace& X,
                                              const StochasticEnsemble& E);

// Target metrics replaced by s^{-1} (t^{-1} d)^alpha; images unchanged.
StochasticEnsemble rescale_log_stochastic(const StochasticEnsemble& E, double s, double t,
                                          double alpha);

struct FillingLiftCheck {
  std::size_t filling_points = 0;
  std::size_t pairs = 0;
  std::size_t lower_violations = 0;   // sampled rho_Y < rho_X
  std::size_t upper_violations = 0;   // mean rho_Y > rho_X + 2 log D
  std::size_t same_base_mismatches = 0;
  double log_distortion = 0.0;        // D from measure_log_stochastic
  double max_excess = 0.0;            // max of mean rho_Y - rho_X over pairs
  bool ok() const {
    return lower_violations == 0 && upper_violations == 0 && same_base_mismatches == 0;
  }
};

// Lifts an ensemble with scaling 1 to the fillings and checks, on the grid of
// heights diam * e^{-j} (j < height_levels), the per-sample lower bound, the
// expectation bound, and equality for pairs over one base point.
FillingLiftCheck verify_filling_lift(const FiniteMetricSpace& X, const StochasticEnsemble& E,
                                     int height_levels = 4, unsigned threads = 1);

struct NetNode {
  int level = 0;  // node height is e^level
  std::size_t point = 0;
  friend bool operator==(const NetNode&, const NetNode&) = default;
};

// Nets N_k of an ultrametric space for k0 >= k >= k_min, with the projection
// to the unique net point within e^k. Below k_min every net is the whole space.
class NetHierarchy {
 public:
  explicit NetHierarchy(const FiniteMetricSpace& U);

  const FiniteMetricSpace& space() const { return U_; }
  int top_level() const { return k0_; }
  int bottom_level() const { return kmin_; }
  const std::vector<std::size_t>& net(int k) const;
  std::size_t project(int k, std::size_t u) const;
  std::vector<NetNode> nodes() const;  // all (k, u) with k_min <= k <= k0 and u in N_k

 private:
  FiniteMetricSpace U_;
  int k0_ = 0, kmin_ = 0;
  std::vector<std::vector<std::size_t>> nets_;   // index k0 - k
  std::vector<std::vector<std::size_t>> proj_;   // index k0 - k, then point
};

NetHierarchy build_net_hierarchy(const FiniteMetricSpace& U);

// Smallest integer k with x <= e^k.
int ceil_log_level(double x);
// Largest integer k with e^k <= x.
int floor_log_level(double x);

// Smallest k >= max(levels) where the projections of both points agree.
int merge_level(const NetHierarchy& H, const NetNode& x, const NetNode& y);
long net_tree_metric(const NetHierarchy& H, const NetNode& x, const NetNode& y);
double node_filling_distance(const NetHierarchy& H, const NetNode& x, const NetNode& y);

// Integer four-point check of k(w,x)+k(y,z) over all quadruples of nodes.
std::optional<std::array<NetNode, 4>> find_net_four_point_violation(
    const NetHierarchy& H, std::span<const NetNode> nodes);

NetNode project_to_net(const NetHierarchy& H, const FillingPoint& a);

struct WeightedTree {
  std::vector<long> parent;         // -1 at the root; parents precede children
  std::vector<double> weight;       // edge to parent, 0 at the root
  std::vector<std::size_t> leaf_of; // input point -> node

  std::size_t node_count() const { return parent.size(); }
  // Path lengths from `source` to every node.
  std::vector<double> distances_from(std::size_t source) const;
  FiniteMetricSpace point_metric(std::size_t basepoint = 0) const;
};

// Incremental insertion by Gromov products. Throws InconsistencyError when the
// realized path metric differs from M by more than tol_rel * diam(M).
WeightedTree realize_tree(const FiniteMetricSpace& M, double tol_rel = 1e-9);

std::string tree_to_json(const WeightedTree& T);
WeightedTree tree_from_json(const std::string& text);

struct RoughConstants {
  double contraction = 1.0;  // D': d_T >= d_X / D' - K in every sample
  double expansion = 1.0;    // D: E d_T <= D d_X + K
  double additive = 1.0;     // K
  bool measured = false;
};

// With D' = D = 1, K is the largest additive defect over samples and pairs
// (replaced by dmin/4 when the ensemble is exactly isometric).
RoughConstants measure_rough_constants(const FiniteMetricSpace& X, const StochasticEnsemble& E);

struct StarUpgrade {
  double theta = 0.0;
  RoughConstants constants;       // after normalizing D' to 1
  std::vector<std::size_t> net_x; // 2K-separated, basepoint first
  std::vector<std::size_t> net_t; // K/6-separated in the tree, image basepoint first
  std::vector<std::size_t> proj_x;
  std::vector<std::size_t> proj_t;
  double lower_factor = 0.0;      // min{1/(8K), 1/30}
  double expansion_bound = 0.0;   // 1/theta + (D + 5/6)(1 + 4K/theta)
  std::vector<std::vector<std::size_t>> labels;  // per sample: x -> position in net_t
  StochasticEnsemble ensemble;    // targets are the images inside the star space
  FiniteMetricSpace star_model;   // min(|X|,4) labels times net_t, same metric as Z
};

// All samples must share one target tree. Uses supplied constants or measures them.
StarUpgrade star_upgrade(const FiniteMetricSpace& X, double theta, const StochasticEnsemble& E,
                         std::optional<RoughConstants> constants = std::nullopt);

}  // namespace stembed
