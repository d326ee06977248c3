#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stembed {

// A finite pointed metric space stored as a dense row-major matrix.
// The constructor checks the cheap invariants (shape, zero diagonal, exact
// symmetry, positive finite off-diagonal entries, basepoint range). The
// triangle inequality is O(n^3) and is checked separately by
// find_triangle_violation.
class FiniteMetricSpace {
 public:
  FiniteMetricSpace(std::size_t size, std::vector<double> dist,
                    std::size_t basepoint = 0);

  static FiniteMetricSpace from_rows(const std::vector<std::vector<double>>& rows,
                                     std::size_t basepoint = 0);

  std::size_t size() const { return n_; }
  std::size_t basepoint() const { return basepoint_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return {d_.data() + i * n_, n_};
  }
  const std::vector<double>& data() const { return d_; }

  double diameter() const { return diam_; }
  // Smallest distance between distinct points; 0 for a single point.
  double min_distance() const { return dmin_; }

  FiniteMetricSpace with_basepoint(std::size_t p) const;

  friend bool operator==(const FiniteMetricSpace& a, const FiniteMetricSpace& b) {
    return a.n_ == b.n_ && a.basepoint_ == b.basepoint_ && a.d_ == b.d_;
  }

 private:
  std::size_t n_;
  std::vector<double> d_;
  std::size_t basepoint_;
  double diam_ = 0.0;
  double dmin_ = 0.0;
};

// Default absolute tolerance for metric validation: 1e-9 * diam.
double default_metric_tol(const FiniteMetricSpace& X);

struct TriangleViolation {
  std::size_t i, j, k;  // d(i,k) > d(i,j) + d(j,k) + tol
  double excess;
};

std::optional<TriangleViolation> find_triangle_violation(const FiniteMetricSpace& X,
                                                         double tol);
std::optional<TriangleViolation> find_triangle_violation(const FiniteMetricSpace& X);

double gromov_product(const FiniteMetricSpace& X, std::size_t x, std::size_t y,
                      std::size_t p);

double hyperbolicity_delta(const FiniteMetricSpace& X);

// Ordered quadruple (w,x,y,z) with d(w,x)+d(y,z) > max{d(w,y)+d(x,z), d(w,z)+d(x,y)} + tol.
struct FourPointWitness {
  std::array<std::size_t, 4> points;
  double excess;
};

std::optional<FourPointWitness> find_four_point_violation(const FiniteMetricSpace& X,
                                                          double tol);
bool check_four_point(const FiniteMetricSpace& X, double tol);

bool is_ultrametric(const FiniteMetricSpace& X, double tol);

FiniteMetricSpace snowflake(const FiniteMetricSpace& X, double alpha);

// Closed family of distortion functions: t^alpha, and omega_p from the
// p-concave example (1/log(1/t) near 0, a power-type tail beyond e^{-p-1}).
class DistortionFunction {
 public:
  enum class Kind { power, omega_p };

  static DistortionFunction power(double alpha);
  static DistortionFunction omega(double p);

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }
  double operator()(double t) const;
  std::string describe() const;

 private:
  DistortionFunction(Kind kind, double param) : kind_(kind), param_(param) {}
  Kind kind_;
  double param_;
};

FiniteMetricSpace apply_distortion(const FiniteMetricSpace& X,
                                   const DistortionFunction& omega);

// Slopes of omega^p between consecutive grid points must be nonincreasing up
// to tol times the largest slope magnitude. Works on nonuniform grids.
bool check_p_concave(const DistortionFunction& omega, double p,
                     std::span<const double> grid, double tol = 1e-9);

std::vector<std::size_t> identity_order(std::size_t n);
// Basepoint first, then the remaining indices in increasing order.
std::vector<std::size_t> basepoint_first_order(const FiniteMetricSpace& X);

// Greedy scan in `order`: keep a point if it is at distance > theta from all
// kept points. Result is in scan order.
std::vector<std::size_t> greedy_maximal_net(const FiniteMetricSpace& X, double theta,
                                            std::span<const std::size_t> order);
std::vector<std::size_t> greedy_maximal_net(const FiniteMetricSpace& X, double theta);

}  // namespace stembed
