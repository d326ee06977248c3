// Acceptance run: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "stembed/errors.hpp"
#include "stembed/filling_tree.hpp"
#include "stembed/free_space.hpp"
#include "stembed/generators.hpp"
#include "stembed/nagata_embed.hpp"
#include "stembed/pipeline.hpp"
#include "stembed/stochastic_ultra.hpp"
#include "support.hpp"

using namespace stembed;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail << "[failed: " << what << "] ";
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(int id, const char* title, double limit_seconds, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.ok = false;
    out.detail << "[exception: " << e.what() << "] ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_seconds > 0 && secs >= limit_seconds) {
    out.ok = false;
    out.detail << "[over time limit " << limit_seconds << " s] ";
  }
  if (!out.ok) ++failures;
  std::printf("%s criterion %d (%s): %s(%.2f s)\n", out.ok ? "PASS" : "FAIL", id, title,
              out.detail.str().c_str(), secs);
  std::fflush(stdout);
}

PipelineConfig pipeline_config() {
  PipelineConfig c;
  c.instance.kind = InstanceSpec::Kind::poincare;
  c.instance.count = 30;
  c.instance.radius = 0.8;
  c.instance.seed = 1;
  c.alpha = 0.5;
  c.level = 12;
  c.samples = 1000;
  c.seed = 1;
  c.measures = 100;
  return c;
}

}  // namespace

int main() {
  criterion(1, "dyadic sampler, exhaustive", 60.0, [](Outcome& out) {
    for (double a : {0.25, 0.5, 0.75}) {
      double prev = 0.0;
      const double series = 1.0 / (2.0 - std::pow(2.0, a));
      double worst_slack = 1e300;
      for (int k = 0; k <= 10; ++k) {
        const auto cert = noncontractivity_certificate(k, a);
        out.require(cert.ok && cert.violations == 0 && cert.min_slack >= -1e-12,
                    "noncontractivity k=" + std::to_string(k));
        worst_slack = std::min(worst_slack, cert.min_slack);
        const double L = exact_expected_lipschitz(k, a);
        if (k > 0) out.require(L <= 0.5 + std::pow(2.0, a - 1.0) * prev + 1e-12, "recursion");
        out.require(L <= series + 1e-12, "series bound");
        prev = L;
      }
      out.detail << "alpha=" << a << " min slack " << worst_slack << " L_10=" << prev << " <= "
                 << series << "; ";
    }
  });

  criterion(2, "net-hierarchy tree metric", 30.0, [](Outcome& out) {
    const double hi = 2.0 * std::log(2.0) + 1.0;
    double lo_seen = 1e300, hi_seen = 0.0;
    std::size_t quads = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const std::size_t n = 24 + 4 * seed;  // up to 64 points
      const auto U = random_ultrametric(n, 3 + static_cast<int>(seed % 2), seed);
      const NetHierarchy H(U);
      const auto nodes = H.nodes();
      out.require(!find_net_four_point_violation(H, nodes).has_value(), "four-point, seed " + std::to_string(seed));
      const std::size_t m = nodes.size();
      quads += (m + 3) * (m + 2) * (m + 1) * m / 24;
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
          const double r = node_filling_distance(H, nodes[a], nodes[b]) /
                           static_cast<double>(net_tree_metric(H, nodes[a], nodes[b]));
          lo_seen = std::min(lo_seen, r);
          hi_seen = std::max(hi_seen, r);
        }
    }
    out.require(lo_seen >= 1.0 / 3.0 && hi_seen <= hi, "ratio range");
    out.detail << quads << " quadruples, ratio in [" << lo_seen << ", " << hi_seen << "] within [0.3333, "
               << hi << "] ";
  });

  criterion(3, "tree realization", 0.0, [](Outcome& out) {
    const auto B = free_group_ball(2, 3);
    out.require(realize_tree(B, 0.0).point_metric() == B, "free group ball exact");
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const std::size_t leaves = 20 * seed;
      const auto M = testing_support::random_weighted_tree(leaves, seed).point_metric();
      const auto R = realize_tree(M).point_metric();
      for (std::size_t i = 0; i < M.size(); ++i)
        for (std::size_t j = 0; j < M.size(); ++j) worst = std::max(worst, std::abs(R(i, j) - M(i, j)) / M.diameter());
    }
    out.require(worst <= 1e-9, "additive metrics within 1e-9");
    out.detail << "free_group_ball(2,3) exact, 10 additive metrics up to 200 leaves, max rel error " << worst << " ";
  });

  criterion(4, "threshold and Assouad certificates", 0.0, [](Outcome& out) {
    std::size_t pairs = 0, violations = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      InstanceSpec s;
      s.seed = seed;
      if (seed % 5 == 0) {
        s.kind = InstanceSpec::Kind::random_ultrametric;
        s.count = 25;
        s.depth = 4;
      } else if (seed % 5 == 4) {
        s.kind = InstanceSpec::Kind::free_group_ball;
        s.depth = 2 + static_cast<int>(seed % 2);
      } else {
        s.count = 20 + seed;
        s.radius = 0.6 + 0.015 * static_cast<double>(seed);
      }
      const auto X = generate(s);
      const double gamma = 2.0;
      std::vector<double> ts;
      const auto [lo, hi] = required_scale_range(X);
      for (int e = lo; e <= hi; ++e) ts.push_back(std::ldexp(1.0, e));
      for (const auto& m : threshold_embedding(X, ts, gamma)) {
        if (m.embedding.max_support() > 2 * (m.cover.dimension + 1)) ++violations;
        for (std::size_t x = 0; x < X.size(); ++x)
          for (std::size_t y = x + 1; y < X.size(); ++y) {
            if (X(x, y) < m.threshold) continue;
            ++pairs;
            if (sup_distance(m.embedding.images[x], m.embedding.images[y]) < m.threshold / (4 * gamma) - 1e-12) ++violations;
          }
      }
      const double a = std::array<double, 3>{0.25, 0.5, 0.75}[seed % 3];
      const auto A = assouad_embedding(X, a);
      for (std::size_t x = 0; x < X.size(); ++x)
        for (std::size_t y = x + 1; y < X.size(); ++y) {
          ++pairs;
          if (sup_distance(A.raw.images[x], A.raw.images[y]) < std::pow(2.0, -a) * std::pow(X(x, y), a) - 1e-12) ++violations;
        }
      const double supp = static_cast<double>(A.unit.max_support());
      if (lp_smallness_constant(A.unit, 1.0) > 2.0 * supp + 1e-12) ++violations;
      if (lp_smallness_constant(A.raw, 1.0) > 2.0 * static_cast<double>(A.raw.max_support()) + 1e-12) ++violations;
    }
    out.require(violations == 0, "zero violations");
    out.detail << "20 instances, " << pairs << " pair checks, " << violations << " violations ";
  });

  const auto config = pipeline_config();
  std::string canonical;
  criterion(5, "end-to-end pipeline", 300.0, [&](Outcome& out) {
    auto c = config;
    c.fill = false;
    c.measures = 0;
    const auto R = run_pipeline(c);
    canonical = report_to_json(R, false);
    const auto& nc = R.certificates.at(0);
    const auto& ex = R.certificates.at(1);
    out.require(nc.name == "noncontractivity" && nc.pass_rate == 1.0 && nc.ok, "noncontractivity pass rate");
    out.require(ex.name == "expansion" && ex.ok, "expansion within the composed bound");
    double worst = 0.0;
    for (const auto& p : R.pairs) worst = std::max(worst, p.mean / p.expected_upper);
    const double d_half = theorem_distortion_bound(0.5);
    out.require(d_half <= 46.63, "D(1/2)");
    out.detail << "pass rate " << nc.pass_rate << ", max mean/bound " << worst
               << ", empirical distortion " << R.constants.empirical_distortion << " vs composed "
               << R.constants.d_composite << " (theorem factor at beta " << R.constants.theorem_factor
               << ", D(1/2)=" << d_half << ") ";
  });

  criterion(6, "free-space certificates", 0.0, [&](Outcome& out) {
    const auto X = generate(config.instance);
    const auto Xa = snowflake(X, config.alpha);
    double gap = 0.0;
    const auto measures = random_test_measures(X.size(), 200, 5);
    for (const auto& mu : measures) {
      for (const auto* M : {&X, &Xa}) {
        const auto plan = optimal_transport(*M, mu);
        const auto dual = dual_certificate(*M, mu, plan);
        out.require(dual.lipschitz <= 1.0 + 1e-9, "dual feasibility");
        gap = std::max(gap, std::abs(plan.cost - dual.value));
      }
    }
    out.require(gap <= 1e-8, "primal = dual");
    double tree_gap = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto W = testing_support::random_weighted_tree(40, seed);
      const auto M = W.point_metric();
      for (const auto& mu : random_test_measures(40, 20, seed)) tree_gap = std::max(tree_gap, std::abs(tree_free_norm(W, mu) - free_norm(M, mu)));
    }
    out.require(tree_gap <= 1e-8, "tree norm = flow norm");
    const auto P = prepare_snowflake_ultra(X, config.alpha, config.level);
    const auto E = sample_snowflake_ultra(P, config.samples, config.seed);
    const auto rep = verify_free_embedding(Xa, E, random_test_measures(X.size(), 100, 11), P.s_certified);
    out.require(rep.ok(), "free embedding bounds");
    out.detail << "primal-dual gap " << gap << ", tree gap " << tree_gap << ", " << rep.measures.size() - rep.failures()
               << "/" << rep.measures.size() << " measures certified (L_emp " << rep.lipschitz_empirical << ") ";
  });

  criterion(7, "star upgrade", 0.0, [](Outcome& out) {
    const auto F = testing_support::rough_fixture(1000, 21);
    const auto U = star_upgrade(F.X, F.theta, F.E, F.constants);
    const double lower = std::min(1.0 / (8.0 * F.constants.additive), 1.0 / 30.0);
    const double bound = 1.0 / F.theta + (F.constants.expansion + 5.0 / 6.0) * (1.0 + 4.0 * F.constants.additive / F.theta);
    out.require(U.lower_factor == lower && std::abs(U.expansion_bound - bound) < 1e-12, "constants");
    std::size_t violations = 0;
    double worst = 0.0;
    for (const auto& st : ensemble_statistics(F.X, U.ensemble)) {
      if (st.min_ratio < lower) ++violations;
      if (st.mean > bound * st.distance) ++violations;
      worst = std::max(worst, st.mean / st.distance);
    }
    out.require(violations == 0, "zero violations");
    out.require(check_four_point(U.star_model, 0.0), "star space four-point");
    out.detail << "factor " << lower << ", mean expansion " << worst << " <= " << bound << ", star model "
               << U.star_model.size() << " points 0-hyperbolic ";
  });

  criterion(8, "determinism", 0.0, [&](Outcome& out) {
    std::vector<PipelineConfig> configs{config};
    PipelineConfig ball;
    ball.instance.kind = InstanceSpec::Kind::free_group_ball;
    ball.instance.depth = 3;
    ball.samples = 300;
    configs.push_back(ball);
    for (const auto& base : configs) {
      std::string first;
      for (unsigned threads : {1u, 1u, 4u}) {
        auto c = base;
        c.threads = threads;
        const auto text = report_to_json(run_pipeline(c), false);
        if (first.empty()) first = text;
        out.require(text == first, "identical reports");
      }
    }
    out.detail << "2 configs x (sequential, sequential, 4 threads) byte-identical ";
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
