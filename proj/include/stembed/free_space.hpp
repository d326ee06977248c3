#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stembed/filling_tree.hpp"
#include "stembed/metric_core.hpp"
#include "stembed/stochastic_ultra.hpp"

namespace stembed {

struct MeanZeroMeasure {
  std::vector<double> weights;  // one entry per point
  double total_variation() const;
};

// Throws ArgumentError unless the weights sum to 0 within 1e-12 (scaled by mass).
void require_mean_zero(const MeanZeroMeasure& mu, std::size_t size);

struct TransportArc {
  std::size_t from = 0, to = 0;  // positive point -> negative point
  double mass = 0.0;
};

struct TransportPlan {
  double cost = 0.0;
  std::vector<TransportArc> arcs;
};

// Successive shortest paths on the bipartite graph of the positive and negative
// parts. With integer_scale set, masses times the scale must be integers and
// the flow is computed on those integers.
TransportPlan optimal_transport(const FiniteMetricSpace& X, const MeanZeroMeasure& mu,
                                std::optional<std::int64_t> integer_scale = std::nullopt);
double free_norm(const FiniteMetricSpace& X, const MeanZeroMeasure& mu);

struct DualCertificate {
  std::vector<double> potential;  // a function on X
  double value = 0.0;             // sum of mu(x) f(x)
  double lipschitz = 0.0;         // max over pairs of |f(x)-f(y)| / d(x,y)
};

// Shortest-path potentials on the residual graph of `plan`; an optimal plan
// gives a 1-Lipschitz f whose pairing with mu equals the cost.
DualCertificate dual_certificate(const FiniteMetricSpace& X, const MeanZeroMeasure& mu,
                                 const TransportPlan& plan);

// Sum over edges of weight * |mass below the edge|.
double tree_free_norm(const WeightedTree& T, const MeanZeroMeasure& mu);

MeanZeroMeasure pushforward(const MeanZeroMeasure& mu, const SampledMap& sample);

// Supports of size 2..8, weights uniform in (-1,1), last weight balancing the rest.
std::vector<MeanZeroMeasure> random_test_measures(std::size_t n, std::size_t count,
                                                  std::uint64_t seed);

struct FreeMeasureCheck {
  double norm = 0.0;          // free norm in X
  double mean = 0.0;          // mean over samples of the tree free norm
  double stddev = 0.0;
  double lower = 0.0;         // s * norm
  double upper = 0.0;         // s * L_emp * norm
  double slack = 0.0;         // 3 sigma / sqrt(M)
  std::size_t sample_lower_violations = 0;
  bool ok = false;
};

struct FreeEmbeddingReport {
  double scaling = 0.0;
  double lipschitz_empirical = 0.0;  // max over pairs of E d_Y / (s d_X)
  std::size_t samples = 0;
  std::vector<FreeMeasureCheck> measures;
  std::size_t failures() const;
  bool ok() const { return failures() == 0; }
};

// Targets are realized as weighted trees (one per distinct target).
FreeEmbeddingReport verify_free_embedding(const FiniteMetricSpace& X, const StochasticEnsemble& E,
                                          const std::vector<MeanZeroMeasure>& measures, double s,
                                          unsigned threads = 1);

}  // namespace stembed
