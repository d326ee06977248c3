#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stembed/errors.hpp"
#include "stembed/generators.hpp"
#include "stembed/metric_core.hpp"

using namespace stembed;

namespace {

// Composite Simpson rule for the hyperbolic length of the segment [-r, r].
double geodesic_length(double r, int panels) {
  auto f = [](double t) { return 2.0 / (1.0 - t * t); };
  const double h = 2.0 * r / panels;
  double s = f(-r) + f(r);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(-r + i * h);
  return s * h / 3.0;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("poincare samples") {
  const auto one = poincare_sample(1, 0.5, 1);
  CHECK(one.size() == 1);
  CHECK(one.diameter() == 0.0);
  for (double r : {0.3, 0.7, 0.9}) {
    const double d = poincare_distance({-r, 0.0}, {r, 0.0});
    CHECK(d == doctest::Approx(geodesic_length(r, 20000)).epsilon(1e-10));
  }
  const auto X = poincare_sample(30, 0.8, 7);
  CHECK(X.size() == 30);
  CHECK_FALSE(find_triangle_violation(X).has_value());
  CHECK(std::isfinite(hyperbolicity_delta(X)));
  CHECK(poincare_sample(30, 0.8, 7) == X);
  CHECK_FALSE(poincare_sample(30, 0.8, 8) == X);
  CHECK_THROWS_AS(poincare_distance({1.0, 0.0}, {0.0, 0.0}), ArgumentError);
}

TEST_CASE("free group balls") {
  CHECK(free_group_ball(2, 0).size() == 1);
  const auto B1 = free_group_ball(2, 1);
  REQUIRE(B1.size() == 5);
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t j = 1; j < 5; ++j)
      if (i != j) CHECK(B1(i, j) == 2.0);
  // 1 + 2r((2r-1)^R - 1)/(2r-2)
  CHECK(free_group_ball_size(2, 3) == 53);
  CHECK(free_group_ball_size(3, 2) == 1 + 6 + 30);
  const auto B3 = free_group_ball(2, 3);
  CHECK(B3.size() == 53);
  CHECK(check_four_point(B3, 0.0));
  CHECK(B3.diameter() == 6.0);
  // smaller balls are prefixes in shortlex order
  const auto B2 = free_group_ball(2, 2);
  for (std::size_t i = 0; i < B2.size(); ++i)
    for (std::size_t j = 0; j < B2.size(); ++j) CHECK(B2(i, j) == B3(i, j));
  CHECK_THROWS_AS(free_group_ball(2, 9, 1000), ResourceError);
  CHECK_THROWS_AS(free_group_ball(1, 2), ArgumentError);
}

TEST_CASE("random ultrametrics") {
  const auto two = random_ultrametric(2, 1, 3);
  CHECK(two(0, 1) == 1.0);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto U = random_ultrametric(5 + seed * 3, 1 + static_cast<int>(seed % 5), seed);
    CHECK(is_ultrametric(U, 0.0));
    CHECK(random_ultrametric(5 + seed * 3, 1 + static_cast<int>(seed % 5), seed) == U);
  }
}

TEST_CASE("instance specs") {
  InstanceSpec s;
  s.count = 25000;
  CHECK_THROWS_AS(generate(s), ResourceError);
  s.kind = parse_instance_kind("free_group_ball");
  s.depth = 2;
  CHECK(generate(s).size() == 17);
  CHECK(to_string(s.kind) == "free_group_ball");
  CHECK_THROWS_AS(parse_instance_kind("torus"), ArgumentError);
}

TEST_CASE("metric files") {
  const auto X = poincare_sample(12, 0.9, 2).with_basepoint(3);
  const auto json_path = temp_path("stembed_gen_test.json");
  save_metric(X, json_path);
  CHECK(load_metric(json_path) == X);
  const auto Y = poincare_sample(12, 0.9, 2).with_basepoint(0);
  const auto csv_path = temp_path("stembed_gen_test.csv");
  save_metric(Y, csv_path);
  CHECK(load_metric(csv_path) == Y);
  std::remove(json_path.c_str());
  std::remove(csv_path.c_str());

  CHECK_THROWS_AS(parse_metric_csv("0,1\n2,0\n"), FormatError);
  CHECK_THROWS_AS(parse_metric_csv("0,nan\nnan,0\n"), FormatError);
  CHECK_THROWS_AS(parse_metric_csv("0,1,2\n1,0\n"), FormatError);
  CHECK_THROWS_AS(parse_metric_json("{\"size\":2,\"basepoint\":0,\"dist\":[[0,1],[1,0]],\"x\":1}"),
                  FormatError);
  CHECK_THROWS_AS(parse_metric_json("{\"size\":3,\"basepoint\":0,\"dist\":[[0,1,5],[1,0,1],[5,1,0]]}"),
                  FormatError);
  CHECK_THROWS_AS(parse_metric_json("not json"), FormatError);
  CHECK_THROWS_AS(load_metric(temp_path("stembed_missing_file.json")), FormatError);
  try {
    parse_metric_csv("0,1\n2,0\n");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("row") != std::string::npos);
  }
}
