#include "stembed/stochastic_ultra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "stembed/errors.hpp"
#include "stembed/parallel.hpp"
#include "stembed/random.hpp"

namespace stembed {

namespace {

void check_level(int k) {
  if (k < 0) throw ArgumentError("dyadic level must be nonnegative");
  if (k > kMaxDyadicLevel) {
    throw ResourceError("dyadic level " + std::to_string(k) + " exceeds the enumeration cap " +
                        std::to_string(kMaxDyadicLevel));
  }
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("exponent must lie in (0,1)");
}

inline int sign_at(std::uint64_t bits, int level) { return (bits >> (level - 1)) & 1 ? 1 : -1; }

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace

bool DyadicPathCode::valid() const {
  if (level < 0 || entries.size() != static_cast<std::size_t>(level) + 1) return false;
  for (int i = 0; i <= level; ++i) {
    if (entries[i] < 0 || entries[i] > (std::int64_t{1} << i)) return false;
    if (i > 0 && std::abs(2 * entries[i - 1] - entries[i]) > 1) return false;
  }
  return true;
}

std::vector<DyadicPathCode> sample_dyadic_map(int k, const SignSequence& eps) {
  check_level(k);
  if (eps.size() != static_cast<std::size_t>(k)) {
    throw ArgumentError("sign sequence must have length k");
  }
  for (int e : eps) {
    if (e != 1 && e != -1) throw ArgumentError("signs must be +1 or -1");
  }
  std::vector<DyadicPathCode> codes{{0, {0}}, {0, {1}}};
  for (int level = 1; level <= k; ++level) {
    const int delta = eps[level - 1];
    const std::int64_t count = std::int64_t{1} << level;
    std::vector<DyadicPathCode> next(count + 1);
    for (std::int64_t j = 0; j <= count; ++j) {
      next[j] = codes[dyadic_parent(j, delta)];
      next[j].level = level;
      next[j].entries.push_back(j);
    }
    codes = std::move(next);
  }
  return codes;
}

int disagreement_index(const DyadicPathCode& a, const DyadicPathCode& b) {
  if (a.level != b.level || a.entries.size() != b.entries.size()) {
    throw ArgumentError("codes must have equal levels");
  }
  for (int i = 0; i <= a.level; ++i) {
    if (a.entries[i] != b.entries[i]) return i;
  }
  return a.level + 1;
}

double dyadic_distance(const DyadicPathCode& a, const DyadicPathCode& b, double alpha) {
  const int i = disagreement_index(a, b);
  if (i > a.level) return 0.0;
  return std::exp2(-i * alpha);
}

int leaf_disagreement_index(std::int64_t a, std::int64_t b, int k, std::uint64_t sign_bits) {
  if (a == b) return k + 1;
  for (int level = k; level >= 1; --level) {
    const int sign = sign_at(sign_bits, level);
    a = dyadic_parent(a, sign);
    b = dyadic_parent(b, sign);
    if (a == b) return level;
  }
  return 0;
}

double exact_expected_lipschitz(int k, double alpha) {
  check_level(k);
  check_alpha(alpha);
  // For each adjacent pair, push the distribution of the ancestor pair up
  // the levels. Once the ancestors coincide at level l-1 the codes first
  // differ at index l. Probabilities are multiples of 2^{-k}, exact in binary64.
  const std::int64_t count = std::int64_t{1} << k;
  double best = 0.0;
  for (std::int64_t j = 0; j < count; ++j) {
    std::map<std::pair<std::int64_t, std::int64_t>, double> states{{{j, j + 1}, 1.0}};
    std::vector<double> prob_index(k + 1, 0.0);
    for (int level = k; level >= 1; --level) {
      std::map<std::pair<std::int64_t, std::int64_t>, double> next;
      for (const auto& [pair, prob] : states) {
        for (int sign : {-1, 1}) {
          const std::int64_t a = dyadic_parent(pair.first, sign);
          const std::int64_t b = dyadic_parent(pair.second, sign);
          if (a == b) prob_index[level] += 0.5 * prob;
          else next[{a, b}] += 0.5 * prob;
        }
      }
      states = std::move(next);
    }
    for (const auto& [pair, prob] : states) prob_index[0] += prob;
    double expected = 0.0;
    for (int i = 0; i <= k; ++i) {
      if (prob_index[i] > 0.0) expected += prob_index[i] * std::exp2(-i * alpha);
    }
    best = std::max(best, expected);
  }
  return std::exp2(k * alpha) * best;
}

double lipschitz_series_bound(double alpha) {
  check_alpha(alpha);
  return 1.0 / (2.0 - std::exp2(alpha));
}

double expected_lipschitz_bound(double alpha) {
  check_alpha(alpha);
  const double t = std::exp2(alpha);
  return std::exp2(3.0 * alpha + 1.0) / ((t - 1.0) * (2.0 - t));
}

double theorem_distortion_bound(double alpha) {
  check_alpha(alpha);
  const double t = std::exp2(alpha);
  return std::exp2(5.0 * alpha + 1.0) / ((t - 1.0) * (2.0 - t));
}

NoncontractivityResult noncontractivity_certificate(int k, double alpha) {
  check_level(k);
  check_alpha(alpha);
  // A pair whose deepest common ancestor sits at level m has first
  // disagreement m+1, so it suffices to bound the spread of leaf numerators
  // below every node. Pairs under different roots differ at index 0.
  const std::int64_t count = std::int64_t{1} << k;
  const double scale = dyadic_scaling(alpha);
  const double unit = std::ldexp(1.0, -k);
  NoncontractivityResult result;
  result.min_slack = std::numeric_limits<double>::infinity();
  std::vector<double> level_distance(k + 2);
  for (int i = 0; i <= k + 1; ++i) level_distance[i] = std::exp2(-i * alpha);

  std::vector<std::int64_t> lo(count + 1), hi(count + 1), plo(count + 1), phi(count + 1);
  const std::uint64_t sequences = std::uint64_t{1} << k;
  for (std::uint64_t bits = 0; bits < sequences; ++bits) {
    for (std::int64_t j = 0; j <= count; ++j) lo[j] = hi[j] = j;
    for (int level = k; level >= 1; --level) {
      const std::int64_t parents = std::int64_t{1} << (level - 1);
      std::fill(plo.begin(), plo.begin() + parents + 1, std::numeric_limits<std::int64_t>::max());
      std::fill(phi.begin(), phi.begin() + parents + 1, std::numeric_limits<std::int64_t>::min());
      const int sign = sign_at(bits, level);
      for (std::int64_t j = 0; j <= (std::int64_t{1} << level); ++j) {
        const std::int64_t p = dyadic_parent(j, sign);
        plo[p] = std::min(plo[p], lo[j]);
        phi[p] = std::max(phi[p], hi[j]);
      }
      const int m = level - 1;
      for (std::int64_t p = 0; p <= parents; ++p) {
        const std::int64_t spread = phi[p] - plo[p];
        if (spread <= 0) continue;
        const double slack =
            level_distance[m + 1] - scale * std::pow(static_cast<double>(spread) * unit, alpha);
        if (slack < result.min_slack) {
          result.min_slack = slack;
          result.worst_signs = bits;
          result.worst_x = plo[p];
          result.worst_y = phi[p];
        }
        // Integer form of the bound: spread * 2^{-k} <= 2^{1-m}.
        if (spread > (std::int64_t{1} << (k + 1)) >> std::min(m, k + 1)) ++result.violations;
      }
      std::copy(plo.begin(), plo.begin() + parents + 1, lo.begin());
      std::copy(phi.begin(), phi.begin() + parents + 1, hi.begin());
    }
  }
  // Pairs split at the roots: distance 1, gap at most 1.
  const double root_slack = 1.0 - scale;
  if (root_slack < result.min_slack) {
    result.min_slack = root_slack;
    result.worst_signs = 0;
    result.worst_x = 0;
    result.worst_y = count;
  }
  result.ok = result.violations == 0 && result.min_slack >= -1e-12;
  return result;
}

std::vector<PairStatistics> ensemble_statistics(const FiniteMetricSpace& X,
                                                const StochasticEnsemble& E, unsigned threads) {
  const std::size_t n = X.size();
  std::vector<PairStatistics> stats(n * (n - 1) / 2);
  parallel_for(stats.size() ? n : 0, threads, [&](std::size_t x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      PairStatistics& st = stats[pair_index(n, x, y)];
      st.x = x;
      st.y = y;
      st.distance = X(x, y);
      st.min_ratio = std::numeric_limits<double>::infinity();
      CompensatedSum sum, sum_log;
      for (const auto& sample : E.samples) {
        const double v = sample.distance(x, y);
        sum.add(v);
        sum_log.add(std::log(v));
        st.min_ratio = std::min(st.min_ratio, v / st.distance);
      }
      const double m = static_cast<double>(E.samples.size());
      st.mean = m > 0 ? sum.value() / m : 0.0;
      st.mean_log = m > 0 ? sum_log.value() / m : 0.0;
      CompensatedSum var;
      for (const auto& sample : E.samples) {
        const double dv = sample.distance(x, y) - st.mean;
        var.add(dv * dv);
      }
      st.stddev = m > 1 ? std::sqrt(var.value() / (m - 1)) : 0.0;
      if (E.samples.empty()) st.min_ratio = 0.0;
    }
  });
  return stats;
}

SampledMap sampled_map_from_distances(std::size_t n, std::size_t basepoint,
                                      const std::vector<double>& pair_distance) {
  SampledMap map;
  map.image.assign(n, 0);
  std::vector<std::size_t> reps;
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t found = reps.size();
    for (std::size_t r = 0; r < reps.size(); ++r) {
      if (pair_distance[pair_index(n, reps[r], x)] == 0.0) {
        found = r;
        break;
      }
    }
    if (found == reps.size()) reps.push_back(x);
    map.image[x] = found;
  }
  const std::size_t m = reps.size();
  std::vector<double> d(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      d[a * m + b] = d[b * m + a] = pair_distance[pair_index(n, reps[a], reps[b])];
    }
  }
  map.target = std::make_shared<const FiniteMetricSpace>(m, std::move(d), map.image[basepoint]);
  return map;
}

QuantizedImages quantize(const SparseVectorEmbedding& S, int k, std::size_t basepoint) {
  check_level(k);
  QuantizedImages Q;
  Q.level = k;
  Q.basepoint = basepoint;
  Q.streams.resize(S.keys.size());
  for (std::size_t c = 0; c < S.keys.size(); ++c) Q.streams[c] = hash_key(S.keys[c].str());
  const double steps = std::ldexp(1.0, k);
  Q.numerators.resize(S.size());
  for (std::size_t x = 0; x < S.size(); ++x) {
    for (const auto& e : S.images[x]) {
      if (!(e.value >= 0.0 && e.value <= 1.0)) {
        throw ArgumentError("coordinate " + S.keys[e.coord].str() + " of point " +
                            std::to_string(x) + " lies outside [0,1]");
      }
      const auto j = static_cast<std::int64_t>(std::llround(e.value * steps));
      if (j != 0) Q.numerators[x].push_back({e.coord, j});
    }
  }
  return Q;
}

std::vector<double> product_lift_distances(const QuantizedImages& Q, double alpha,
                                           std::uint64_t seed, std::uint64_t sample) {
  const std::size_t n = Q.size();
  const int k = Q.level;
  std::vector<std::uint64_t> bits(Q.streams.size());
  for (std::size_t c = 0; c < bits.size(); ++c) bits[c] = stream_bits(seed, Q.streams[c], sample);
  std::vector<double> level_distance(k + 1);
  for (int i = 0; i <= k; ++i) level_distance[i] = std::exp2(-i * alpha);

  std::vector<double> out(n * (n - 1) / 2, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    const auto& a = Q.numerators[x];
    for (std::size_t y = x + 1; y < n; ++y) {
      const auto& b = Q.numerators[y];
      int first = k + 1;
      std::size_t i = 0, j = 0;
      while ((i < a.size() || j < b.size()) && first > 0) {
        std::size_t c;
        std::int64_t va = 0, vb = 0;
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
          c = a[i].first;
          va = a[i++].second;
        } else if (i == a.size() || b[j].first < a[i].first) {
          c = b[j].first;
          vb = b[j++].second;
        } else {
          c = a[i].first;
          va = a[i++].second;
          vb = b[j++].second;
        }
        if (va != vb) first = std::min(first, leaf_disagreement_index(va, vb, k, bits[c]));
      }
      out[pair_index(n, x, y)] = first > k ? 0.0 : level_distance[first];
    }
  }
  return out;
}

SampledMap product_lift_sample(const QuantizedImages& Q, double alpha, std::uint64_t seed,
                               std::uint64_t sample) {
  check_alpha(alpha);
  return sampled_map_from_distances(Q.size(), Q.basepoint,
                                    product_lift_distances(Q, alpha, seed, sample));
}

SampledMap product_lift_sample(const SparseVectorEmbedding& S, int k, double alpha,
                               std::uint64_t seed, std::uint64_t sample, std::size_t basepoint) {
  return product_lift_sample(quantize(S, k, basepoint), alpha, seed, sample);
}

SnowflakeUltraPipeline prepare_snowflake_ultra(const FiniteMetricSpace& X, double alpha, int k,
                                               double gamma, std::size_t max_colors) {
  check_alpha(alpha);
  check_level(k);
  if (X.size() < 2) throw ArgumentError("pipeline needs at least two points");
  SnowflakeUltraPipeline P;
  P.alpha = alpha;
  P.beta = std::sqrt(alpha);
  P.level = k;
  const double beta = P.beta;
  P.assouad = assouad_embedding(X, beta, std::nullopt, gamma, max_colors);
  P.quantized = quantize(P.assouad.unit, k, X.basepoint());
  P.quantization_step = std::ldexp(1.0, -k);
  P.smallness = std::pow(lp_smallness_constant(P.assouad.unit, beta), beta);
  P.lipschitz_factor = expected_lipschitz_bound(beta);
  P.theorem_factor = theorem_distortion_bound(beta);

  // Sign splitting halves the sup gap at worst; the unit rescale divides by B.
  const double B = P.assouad.scale;
  const double low = P.assouad.lower_constant / (2.0 * B);
  const double high = P.assouad.sup_upper_constant / B;
  const double s_dyadic = dyadic_scaling(beta);
  P.s_composite = s_dyadic * std::pow(low, beta);
  P.d_composite = P.lipschitz_factor * P.smallness * std::pow(high, beta) / P.s_composite;

  const std::size_t n = X.size();
  const auto& unit = P.assouad.unit.images;
  P.certified_lower.assign(n * (n - 1) / 2, 0.0);
  P.expected_upper.assign(n * (n - 1) / 2, 0.0);
  P.s_certified = std::numeric_limits<double>::infinity();
  const double q_slack = std::pow(P.quantization_step, beta);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      const std::size_t idx = pair_index(n, x, y);
      const double gap = sup_distance(unit[x], unit[y]);
      const double da = std::pow(X(x, y), alpha);
      P.certified_lower[idx] =
          s_dyadic * std::pow(std::max(0.0, gap - P.quantization_step), beta);
      P.s_certified = std::min(P.s_certified, P.certified_lower[idx] / da);
      const double support = static_cast<double>(union_support(unit[x], unit[y]));
      P.expected_upper[idx] =
          P.lipschitz_factor * (P.smallness * std::pow(high, beta) * da + support * q_slack);
    }
  }
  return P;
}

SampledMap snowflake_ultra_pipeline_sample(const SnowflakeUltraPipeline& P, std::uint64_t seed,
                                           std::uint64_t sample) {
  return product_lift_sample(P.quantized, P.beta, seed, sample);
}

StochasticEnsemble sample_snowflake_ultra(const SnowflakeUltraPipeline& P, std::size_t samples,
                                          std::uint64_t seed, unsigned threads) {
  StochasticEnsemble E;
  E.seed = seed;
  E.scaling = P.s_certified;
  E.samples.resize(samples);
  parallel_for(samples, threads, [&](std::size_t i) {
    E.samples[i] = snowflake_ultra_pipeline_sample(P, seed, i);
  });
  return E;
}

}  // namespace stembed
