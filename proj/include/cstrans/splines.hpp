#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cstrans/errors.hpp"

namespace cstrans {

// Interior knot count for a sample of size n: max(4, ceil(multiplier * n^(1/5))).
int basis_count(int n, double multiplier = 2.0);

// 1-D k-means cluster centers as interior knots: centers initialized at the
// j/(k+1) sample quantiles, Lloyd iterations to a fixed point, centers clipped
// strictly inside (min w, max w). Deterministic; seed reserved for interface
// stability.
std::vector<double> select_knots(const std::vector<double>& w, int k_interior,
                                 std::uint64_t seed = 0);

// Cubic B-spline basis on [a, b] with 4-fold end knots. Evaluation clamps the
// argument to [a, b], so the spline is extended by its boundary values.
class SplineBasis {
 public:
  SplineBasis() : SplineBasis(0.0, 1.0, {}) {}  // no interior knots
  SplineBasis(double a, double b, std::vector<double> interior);

  int size() const { return static_cast<int>(knots_.size()) - 4; }
  double a() const { return a_; }
  double b() const { return b_; }
  const std::vector<double>& knots() const { return knots_; }
  std::vector<double> interior() const;

  Eigen::VectorXd eval(double w) const;     // basis values (partition of unity)
  Eigen::VectorXd eval_d2(double w) const;  // second derivatives

  // Omega_jk = int_a^b B_j''(w) B_k''(w) dw, exact: the integrand is piecewise
  // quadratic, so 2-point Gauss per knot interval integrates it exactly.
  Eigen::MatrixXd penalty() const;

 private:
  int find_interval(double w) const;

  double a_, b_;
  std::vector<double> knots_;  // clamped: a,a,a,a, interior..., b,b,b,b
};

// Centered smooth term h(w) = coeffs . basis(w) - center_offset.
struct SmoothEffect {
  SplineBasis basis;
  Eigen::VectorXd coeffs;
  double center_offset = 0.0;

  double operator()(double w) const {
    if (coeffs.size() == 0) return 0.0;  // default state: no smooth effect
    return basis.eval(w).dot(coeffs) - center_offset;
  }

  // Sets the offset so the sample mean of h over w_values is exactly zero.
  void center_on(const Eigen::VectorXd& w_values);

  double roughness(const Eigen::MatrixXd& omega) const {
    return coeffs.dot(omega * coeffs);
  }
};

}  // namespace cstrans
