#pragma once
// Shared fixtures for the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <memory>
#include <vector>

#include "stembed/filling_tree.hpp"
#include "stembed/generators.hpp"
#include "stembed/metric_core.hpp"
#include "stembed/random.hpp"
#include "stembed/stochastic_ultra.hpp"

namespace testing_support {

using namespace stembed;

// Random weighted tree; the points are `leaves` pendant nodes hung off a
// random skeleton, weights uniform in [0.25, 2).
inline WeightedTree random_weighted_tree(std::size_t leaves, std::uint64_t seed) {
  Rng rng(seed);
  WeightedTree T;
  const std::size_t skeleton = std::max<std::size_t>(1, leaves / 2);
  T.parent.push_back(-1);
  T.weight.push_back(0.0);
  for (std::size_t v = 1; v < skeleton; ++v) {
    T.parent.push_back(static_cast<long>(rng.below(v)));
    T.weight.push_back(rng.uniform(0.25, 2.0));
  }
  for (std::size_t i = 0; i < leaves; ++i) {
    T.leaf_of.push_back(T.parent.size());
    T.parent.push_back(static_cast<long>(rng.below(skeleton)));
    T.weight.push_back(rng.uniform(0.25, 2.0));
  }
  return T;
}

// Unit 4-cycle.
inline FiniteMetricSpace four_cycle() {
  return FiniteMetricSpace::from_rows({{0, 1, 2, 1}, {1, 0, 1, 2}, {2, 1, 0, 1}, {1, 2, 1, 0}});
}

// Brute-force hyperbolicity from the four-point sums: max over quadruples of
// (largest - second largest pair sum) / 2.
inline double brute_force_delta(const FiniteMetricSpace& X) {
  const std::size_t n = X.size();
  double delta = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) {
          std::array<double, 3> s{X(a, b) + X(c, d), X(a, c) + X(b, d), X(a, d) + X(b, c)};
          std::sort(s.begin(), s.end());
          delta = std::max(delta, 0.5 * (s[2] - s[1]));
        }
  return delta;
}

// Rough tree ensemble over free_group_ball(2,2) into free_group_ball(2,3):
// each word of length 2 moves to a random child with probability 1/2.
// d_T >= d_X and E d_T <= d_X + 1, so D' = 1, D = 3, K = 1/4 are valid.
struct RoughFixture {
  FiniteMetricSpace X;
  std::shared_ptr<const FiniteMetricSpace> T;
  StochasticEnsemble E;
  RoughConstants constants;
  double theta = 0.5;
};

inline RoughFixture rough_fixture(std::size_t samples, std::uint64_t seed) {
  RoughFixture F{free_group_ball(2, 2), std::make_shared<const FiniteMetricSpace>(free_group_ball(2, 3)),
                 {}, {}, 0.5};
  F.constants.contraction = 1.0;
  F.constants.expansion = 3.0;
  F.constants.additive = 0.25;
  const std::size_t n = F.X.size();
  const auto& T = *F.T;
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t x = 0; x < n; ++x) {
    if (F.X(x, 0) != 2.0) continue;
    for (std::size_t c = 0; c < T.size(); ++c) {
      if (T(c, 0) == 3.0 && T(c, x) == 1.0) children[x].push_back(c);
    }
  }
  Rng rng(seed);
  F.E.seed = seed;
  for (std::size_t i = 0; i < samples; ++i) {
    SampledMap m;
    m.target = F.T;
    m.image = identity_order(n);
    for (std::size_t x = 0; x < n; ++x) {
      if (!children[x].empty() && rng.uniform() < 0.5) {
        m.image[x] = children[x][rng.below(children[x].size())];
      }
    }
    F.E.samples.push_back(std::move(m));
  }
  return F;
}

}  // namespace testing_support
