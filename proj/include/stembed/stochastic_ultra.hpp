#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "stembed/metric_core.hpp"
#include "stembed/nagata_embed.hpp"

namespace stembed {

inline constexpr int kMaxDyadicLevel = 14;

// Element of Gamma_k: numerators j_0..j_k with entry i equal to j_i / 2^i.
struct DyadicPathCode {
  int level = 0;
  std::vector<std::int64_t> entries;

  bool valid() const;
  friend bool operator==(const DyadicPathCode&, const DyadicPathCode&) = default;
};

// eps[l-1] in {-1,+1} is the sign used when refining from level l-1 to l.
using SignSequence = std::vector<int>;

// Parent numerator one level up: j/2 for even j, (j + sign)/2 for odd j.
inline std::int64_t dyadic_parent(std::int64_t j, int sign) {
  return (j % 2 == 0) ? j / 2 : (j + sign) / 2;
}

// Codes of all points j / 2^k, indexed by j in [0, 2^k].
std::vector<DyadicPathCode> sample_dyadic_map(int k, const SignSequence& eps);

// First index where the codes differ; level+1 if identical.
int disagreement_index(const DyadicPathCode& a, const DyadicPathCode& b);
double dyadic_distance(const DyadicPathCode& a, const DyadicPathCode& b, double alpha);

// Same index computed from leaf numerators and packed sign bits
// (bit l-1 set means sign +1 at level l). Returns k+1 if a == b.
int leaf_disagreement_index(std::int64_t a, std::int64_t b, int k, std::uint64_t sign_bits);

// L_k: 2^{k alpha} times the largest expected distance between adjacent
// points of D_k, averaged exactly over all 2^k sign sequences.
double exact_expected_lipschitz(int k, double alpha);

// Right-hand sides of the bounds on the sampler.
double lipschitz_series_bound(double alpha);    // sup_k L_k <= 1/(2 - 2^alpha)
double expected_lipschitz_bound(double alpha);  // 2^{3a+1}/((2^a-1)(2-2^a))
double theorem_distortion_bound(double alpha);  // 2^{5a+1}/((2^a-1)(2-2^a))
inline double dyadic_scaling(double alpha) { return std::pow(4.0, -alpha); }

struct NoncontractivityResult {
  bool ok = true;
  std::size_t violations = 0;  // nodes whose subtree spread breaks the bound
  double min_slack = 0.0;      // min of d - 4^{-alpha}|x-y|^alpha over all pairs
  std::uint64_t worst_signs = 0;
  std::int64_t worst_x = 0, worst_y = 0;
};

// Exhaustive over all sign sequences and pairs of D_k.
NoncontractivityResult noncontractivity_certificate(int k, double alpha);

struct SampledMap {
  std::vector<std::size_t> image;                   // point -> target index
  std::shared_ptr<const FiniteMetricSpace> target;  // basepoint = image of the source basepoint
  double distance(std::size_t x, std::size_t y) const {
    return (*target)(image[x], image[y]);
  }
};

struct StochasticEnsemble {
  std::uint64_t seed = 0;
  double scaling = 1.0;  // declared noncontractivity factor s
  std::vector<SampledMap> samples;
  std::size_t size() const { return samples.size(); }
};

struct PairStatistics {
  std::size_t x = 0, y = 0;
  double distance = 0.0;   // d_X(x,y)
  double min_ratio = 0.0;  // min over samples of d_Y / d_X
  double mean = 0.0;       // mean image distance
  double stddev = 0.0;     // sample standard deviation of image distance
  double mean_log = 0.0;   // mean log image distance (-inf if some image collapses)
};

// One entry per unordered pair x < y, in lexicographic order. Sums are
// compensated and run over samples in index order.
std::vector<PairStatistics> ensemble_statistics(const FiniteMetricSpace& X,
                                                const StochasticEnsemble& E,
                                                unsigned threads = 1);

// Builds a sampled map from pairwise image distances (upper triangle,
// lexicographic); points at distance 0 share a target point.
SampledMap sampled_map_from_distances(std::size_t n, std::size_t basepoint,
                                      const std::vector<double>& pair_distance);

// Coordinates snapped to D_k with per-coordinate sign streams.
struct QuantizedImages {
  int level = 0;
  std::vector<std::uint64_t> streams;  // per coordinate, hashed from its key
  std::vector<std::vector<std::pair<std::size_t, std::int64_t>>> numerators;  // sorted, nonzero
  std::size_t basepoint = 0;
  std::size_t size() const { return numerators.size(); }
};

QuantizedImages quantize(const SparseVectorEmbedding& S, int k, std::size_t basepoint = 0);

// Pairwise product-ultrametric distances for one sample.
std::vector<double> product_lift_distances(const QuantizedImages& Q, double alpha,
                                           std::uint64_t seed, std::uint64_t sample);
SampledMap product_lift_sample(const QuantizedImages& Q, double alpha, std::uint64_t seed,
                               std::uint64_t sample);
SampledMap product_lift_sample(const SparseVectorEmbedding& S, int k, double alpha,
                               std::uint64_t seed, std::uint64_t sample,
                               std::size_t basepoint = 0);

inline std::size_t pair_index(std::size_t n, std::size_t x, std::size_t y) {
  if (x > y) std::swap(x, y);
  return x * n - x * (x + 1) / 2 + (y - x - 1);
}

// Sample-independent part of the Nagata snowflake sampler: Assouad map of
// (X, d^beta) with beta = sqrt(alpha), rescaled to [0,1], snapped to D_k;
// then a product lift with exponent beta.
struct SnowflakeUltraPipeline {
  double alpha = 0.5;
  double beta = 0.0;
  int level = 12;
  AssouadEmbedding assouad;
  QuantizedImages quantized;
  double quantization_step = 0.0;   // 2^{-k}: bound on any quantized gap error
  double smallness = 0.0;           // (A_beta of unit images)^beta
  double lipschitz_factor = 0.0;    // expected Lipschitz constant of the base sampler
  double theorem_factor = 0.0;      // distortion bound of the base sampler
  double s_composite = 0.0;         // image >= s_composite * d^alpha before quantization
  double d_composite = 0.0;         // composed distortion bound
  double s_certified = 0.0;         // min over pairs of certified_lower / d^alpha
  std::vector<double> certified_lower;  // per pair, holds in every sample
  std::vector<double> expected_upper;   // per pair, bound on the mean image distance
};

SnowflakeUltraPipeline prepare_snowflake_ultra(const FiniteMetricSpace& X, double alpha, int k,
                                               double gamma = 2.0, std::size_t max_colors = 64);

SampledMap snowflake_ultra_pipeline_sample(const SnowflakeUltraPipeline& P, std::uint64_t seed,
                                           std::uint64_t sample);

StochasticEnsemble sample_snowflake_ultra(const SnowflakeUltraPipeline& P, std::size_t samples,
                                          std::uint64_t seed, unsigned threads = 1);

}  // namespace stembed
