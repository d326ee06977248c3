#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stembed/metric_core.hpp"

namespace stembed {

struct NagataCover {
  double scale = 0.0;
  double gamma = 2.0;
  std::size_t dimension = 0;
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> colors;   // one per member; empty if not built by coloring
  std::vector<std::size_t> centers;  // net point of each member; empty if unknown
};

// Voronoi cells of a greedy maximal s-net, greedily colored so that cells of
// one color are more than s apart. dimension = colors - 1.
NagataCover build_nagata_cover(const FiniteMetricSpace& X, double s,
                               std::size_t max_colors = 64);
NagataCover build_nagata_cover(const FiniteMetricSpace& X, double s, std::size_t max_colors,
                               std::span<const std::size_t> order);

enum class CoverCheckMode { witness_family, exhaustive };

struct CoverCheck {
  bool ok = true;
  std::string reason;
  std::vector<std::size_t> witness;  // offending point set (or member) on failure
  std::size_t max_multiplicity = 0;  // largest member count seen over tested sets
};

// Diameter bound plus multiplicity over a witness family (singletons, close
// pairs and triples, greedily grown cliques) or, in exhaustive mode, over
// every subset of diameter <= s (at most 20 points).
CoverCheck verify_nagata_cover(const FiniteMetricSpace& X, const NagataCover& cover,
                               CoverCheckMode mode = CoverCheckMode::witness_family);

struct SparseEntry {
  std::size_t coord;
  double value;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};
// Sorted by coordinate, zero entries omitted.
using SparseVector = std::vector<SparseEntry>;

double sup_distance(const SparseVector& a, const SparseVector& b);
double lp_distance(const SparseVector& a, const SparseVector& b, double p);
std::size_t union_support(const SparseVector& a, const SparseVector& b);

struct CoordinateKey {
  int scale = 0;           // scale label (dyadic exponent for Assouad maps)
  std::size_t member = 0;  // cover member at that scale
  int sign = 0;            // 0 for signed coordinates, +1/-1 for split parts
  std::string str() const;
};

struct SparseVectorEmbedding {
  std::vector<CoordinateKey> keys;
  std::vector<SparseVector> images;
  std::size_t support_bound = 0;

  std::size_t size() const { return images.size(); }
  std::size_t max_support() const;
};

struct ThresholdMap {
  double threshold = 0.0;
  NagataCover cover;
  SparseVectorEmbedding embedding;
};

// One map per threshold t, from a cover at scale t/(2 gamma); coordinates
// max{0, t/(4 gamma) - dist(member, x)} shifted so the basepoint goes to 0.
// Covers are built with constant 2; smaller gamma is accepted only if the
// built cover happens to satisfy it.
std::vector<ThresholdMap> threshold_embedding(const FiniteMetricSpace& X,
                                              std::span<const double> thresholds,
                                              double gamma = 2.0, std::size_t max_colors = 64);
ThresholdMap threshold_map(const FiniteMetricSpace& X, double t, double gamma, int scale_label,
                           std::size_t max_colors = 64);

struct AssouadEmbedding {
  double alpha = 0.5;
  double gamma = 2.0;
  int n_min = 0, n_max = 0;
  std::size_t max_dimension = 0;    // largest cover dimension over scales
  std::size_t threshold_support = 0;  // largest per-point support of one threshold map
  SparseVectorEmbedding raw;        // signed coordinates, basepoint at 0
  SparseVectorEmbedding unit;       // sign-split parts divided by `scale`, in [0,1]
  double scale = 1.0;               // largest |raw coordinate|
  double lower_constant = 0.0;      // sup gap >= lower_constant * d^alpha
  double sup_upper_constant = 0.0;  // sup gap <= sup_upper_constant * d^alpha
  double l1_upper_constant = 0.0;   // l1 gap  <= l1_upper_constant * d^alpha
  double distortion_bound() const { return sup_upper_constant / lower_constant; }
  double l1_distortion_bound() const { return l1_upper_constant / lower_constant; }
};

// [floor(log2 dmin) - 1, ceil(log2 diam)]; scales outside it are dropped.
std::pair<int, int> required_scale_range(const FiniteMetricSpace& X);

AssouadEmbedding assouad_embedding(const FiniteMetricSpace& X, double alpha,
                                   std::optional<std::pair<int, int>> scale_range = std::nullopt,
                                   double gamma = 2.0, std::size_t max_colors = 64);

double lp_smallness_constant(const SparseVectorEmbedding& E, double p);

struct PartitionOfUnity {
  double scale = 0.0;
  double lambda = 1.5;
  std::vector<std::size_t> net;
  std::vector<std::vector<double>> weights;  // [point][net position]
  std::size_t max_overlap = 0;               // most nonzero bumps at a point
  double lipschitz_factor = 0.0;             // each weight is (factor/scale)-Lipschitz
};

// Bumps max{0, 1 - 2 dist(B_a, x)/s} around balls B_a of radius (lambda - 1/2)s
// centred at the net points, normalized to sum to 1. Support of each weight
// lies in the open ball of radius lambda*s around its centre.
PartitionOfUnity partition_of_unity(const FiniteMetricSpace& X,
                                    std::span<const std::size_t> net, double s,
                                    double lambda = 1.5);

}  // namespace stembed
