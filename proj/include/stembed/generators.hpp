#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stembed/metric_core.hpp"

namespace stembed {

inline constexpr std::size_t kMaxInstanceSize = 20000;

struct InstanceSpec {
  enum class Kind { poincare, free_group_ball, random_ultrametric, file };
  Kind kind = Kind::poincare;
  std::size_t count = 30;
  double radius = 0.8;
  int rank = 2;
  int depth = 3;
  std::uint64_t seed = 1;
  std::string path;
  std::size_t max_points = kMaxInstanceSize;
};

std::string to_string(InstanceSpec::Kind kind);
InstanceSpec::Kind parse_instance_kind(const std::string& name);

FiniteMetricSpace generate(const InstanceSpec& spec);

using DiskPoint = std::array<double, 2>;

// Hyperbolic distance between two points of the open unit disk.
double poincare_distance(const DiskPoint& a, const DiskPoint& b);
// Basepoint is the point closest to the origin.
FiniteMetricSpace poincare_metric(const std::vector<DiskPoint>& points);
std::vector<DiskPoint> poincare_points(std::size_t n, double r, std::uint64_t seed);
FiniteMetricSpace poincare_sample(std::size_t n, double r, std::uint64_t seed);

std::size_t free_group_ball_size(int rank, int radius);
// Reduced words of length <= radius over `rank` free generators, in
// shortlex order; letters 2i and 2i+1 are a generator and its inverse.
std::vector<std::vector<int>> free_group_words(int rank, int radius,
                                               std::size_t cap = kMaxInstanceSize);
FiniteMetricSpace free_group_ball(int rank, int radius,
                                  std::size_t cap = kMaxInstanceSize);

// Points separated at hierarchy level l (0 = top) sit at distance e^{-l}.
FiniteMetricSpace random_ultrametric(std::size_t n, int depth, std::uint64_t seed);

FiniteMetricSpace load_metric(const std::string& path);
void save_metric(const FiniteMetricSpace& X, const std::string& path);

FiniteMetricSpace parse_metric_json(const std::string& text);
std::string metric_to_json(const FiniteMetricSpace& X);
FiniteMetricSpace parse_metric_csv(const std::string& text);
std::string metric_to_csv(const FiniteMetricSpace& X);

}  // namespace stembed
