#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stembed/errors.hpp"
#include "stembed/free_space.hpp"
#include "stembed/generators.hpp"
#include "support.hpp"

using namespace stembed;

namespace {

MeanZeroMeasure dirac_difference(std::size_t n, std::size_t x, std::size_t y) {
  MeanZeroMeasure mu;
  mu.weights.assign(n, 0.0);
  mu.weights[x] += 1.0;
  mu.weights[y] -= 1.0;
  return mu;
}

FiniteMetricSpace scaled(const FiniteMetricSpace& X, double c) {
  auto d = X.data();
  for (double& v : d) v *= c;
  return FiniteMetricSpace(X.size(), d, X.basepoint());
}

}  // namespace

TEST_CASE("free norm basics") {
  const auto X = poincare_sample(15, 0.8, 1);
  CHECK(free_norm(X, dirac_difference(15, 2, 9)) == X(2, 9));
  MeanZeroMeasure zero;
  zero.weights.assign(15, 0.0);
  CHECK(free_norm(X, zero) == 0.0);
  auto bad = dirac_difference(15, 1, 2);
  bad.weights[3] = 0.5;
  CHECK_THROWS_AS(free_norm(X, bad), ArgumentError);
  CHECK_THROWS_AS(free_norm(X, dirac_difference(14, 1, 2)), ArgumentError);
}

TEST_CASE("primal and dual agree") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto X = poincare_sample(25, 0.85, seed);
    for (const auto& mu : random_test_measures(X.size(), 50, seed)) {
      const auto plan = optimal_transport(X, mu);
      // marginals of the plan reproduce mu
      std::vector<double> net(X.size(), 0.0);
      for (const auto& a : plan.arcs) {
        CHECK(a.mass > 0.0);
        net[a.from] += a.mass;
        net[a.to] -= a.mass;
      }
      for (std::size_t x = 0; x < X.size(); ++x) CHECK(net[x] == doctest::Approx(mu.weights[x]).epsilon(1e-12));
      const auto dual = dual_certificate(X, mu, plan);
      CHECK(dual.lipschitz <= 1.0 + 1e-9);
      CHECK(std::abs(dual.value - plan.cost) <= 1e-8);
    }
  }
}

TEST_CASE("integer flow mode") {
  const auto X = poincare_sample(12, 0.8, 3);
  MeanZeroMeasure mu;
  mu.weights = {0.25, -0.5, 0.75, 0, 0, -0.25, 0, -0.25, 0, 0, 0, 0};
  const auto exact = optimal_transport(X, mu, 4);
  CHECK(exact.cost == doctest::Approx(optimal_transport(X, mu).cost).epsilon(1e-14));
  for (const auto& a : exact.arcs) CHECK(a.mass * 4 == std::round(a.mass * 4));
  mu.weights[0] = 0.3;
  mu.weights[2] = 0.7;
  CHECK_THROWS_AS(optimal_transport(X, mu, 4), ArgumentError);
}

TEST_CASE("tree free norm") {
  const auto star = FiniteMetricSpace::from_rows({{0, 2, 2, 2}, {2, 0, 2, 2}, {2, 2, 0, 2}, {2, 2, 2, 0}});
  const auto T = realize_tree(star);
  MeanZeroMeasure split;
  split.weights = {0.5, 0.5, -1.0, 0.0};
  CHECK(tree_free_norm(T, split) == 2.0);
  CHECK(tree_free_norm(T, dirac_difference(4, 0, 2)) == 2.0);
  MeanZeroMeasure spread;
  spread.weights = {1.0, -1.0 / 3, -1.0 / 3, -1.0 / 3};
  // 1 on the edge of point 0 plus 1/3 on each of the other three
  CHECK(tree_free_norm(T, spread) == doctest::Approx(2.0));

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto W = testing_support::random_weighted_tree(30, seed);
    const auto M = W.point_metric();
    const auto d = W.distances_from(W.leaf_of[3]);
    CHECK(tree_free_norm(W, dirac_difference(30, 3, 17)) == doctest::Approx(d[W.leaf_of[17]]).epsilon(1e-14));
    for (const auto& mu : random_test_measures(30, 40, seed)) {
      CHECK(std::abs(tree_free_norm(W, mu) - free_norm(M, mu)) <= 1e-8);
    }
    auto W4 = W;
    for (double& w : W4.weight) w *= 4.0;
    const auto mu = random_test_measures(30, 1, seed + 10)[0];
    CHECK(tree_free_norm(W4, mu) == 4.0 * tree_free_norm(W, mu));
    CHECK(free_norm(scaled(M, 2.0), mu) == 2.0 * free_norm(M, mu));
  }
  WeightedTree broken = T;
  broken.leaf_of[1] = 99;
  CHECK_THROWS_AS(tree_free_norm(broken, dirac_difference(4, 1, 0)), ArgumentError);
}

TEST_CASE("pushforward") {
  auto target = std::make_shared<const FiniteMetricSpace>(free_group_ball(2, 1));
  SampledMap relabel{{4, 0, 2}, target};
  MeanZeroMeasure mu;
  mu.weights = {1.0, -0.25, -0.75};
  const auto p = pushforward(mu, relabel);
  CHECK(p.weights == std::vector<double>{-0.25, 0.0, -0.75, 0.0, 1.0});
  SampledMap collapse{{1, 1, 2}, target};
  MeanZeroMeasure opp;
  opp.weights = {0.5, -0.5, 0.0};
  CHECK(pushforward(opp, collapse).total_variation() == 0.0);
  CHECK(p.total_variation() == mu.total_variation());
}

TEST_CASE("random test measures") {
  const auto a = random_test_measures(20, 30, 4);
  const auto b = random_test_measures(20, 30, 4);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].weights == b[i].weights);
    std::size_t support = 0;
    for (double w : a[i].weights) support += w != 0.0;
    CHECK(support >= 2);
    CHECK(support <= 8);
    CHECK_NOTHROW(require_mean_zero(a[i], 20));
  }
}

TEST_CASE("free embedding certificates") {
  // the identity ensemble on a tree metric is an isometry
  const auto B = free_group_ball(2, 2);
  StochasticEnsemble E;
  auto target = std::make_shared<const FiniteMetricSpace>(B);
  for (int i = 0; i < 10; ++i) E.samples.push_back({identity_order(B.size()), target});
  const auto measures = random_test_measures(B.size(), 40, 3);
  const auto rep = verify_free_embedding(B, E, measures, 1.0);
  CHECK(rep.ok());
  CHECK(rep.lipschitz_empirical == 1.0);
  for (const auto& m : rep.measures) CHECK(m.mean == doctest::Approx(m.norm).epsilon(1e-12));

  // Dirac differences against the basepoint: the bound is the pair expectation
  const auto X = poincare_sample(16, 0.8, 5);
  const auto P = prepare_snowflake_ultra(X, 0.5, 10);
  const auto S = sample_snowflake_ultra(P, 300, 8);
  const auto Xa = snowflake(X, 0.5);
  std::vector<MeanZeroMeasure> diracs;
  for (std::size_t x = 0; x < X.size(); ++x)
    if (x != X.basepoint()) diracs.push_back(dirac_difference(X.size(), x, X.basepoint()));
  const auto r2 = verify_free_embedding(Xa, S, diracs, P.s_certified);
  CHECK(r2.ok());
  const auto stats = ensemble_statistics(Xa, S);
  std::size_t k = 0;
  for (std::size_t x = 0; x < X.size(); ++x) {
    if (x == X.basepoint()) continue;
    const auto& st = stats[pair_index(X.size(), x, X.basepoint())];
    CHECK(r2.measures[k].mean == doctest::Approx(st.mean).epsilon(1e-9));
    CHECK(r2.measures[k].upper >= st.mean * (1 - 1e-12));
    ++k;
  }
  for (const auto& mu : random_test_measures(X.size(), 30, 1)) {
    for (const auto& m : S.samples) {
      const auto p = pushforward(mu, m);
      const auto T = realize_tree(*m.target);
      CHECK(tree_free_norm(T, p) <= 0.5 * mu.total_variation() * m.target->diameter() * (1 + 1e-9));
      break;
    }
  }
}
