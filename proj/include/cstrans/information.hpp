#pragma once

#include <Eigen/Dense>
#include <functional>

#include "cstrans/errors.hpp"
#include "cstrans/families.hpp"

namespace cstrans {

struct MarginalGrid {
  Eigen::VectorXd points;
  Eigen::VectorXd weights;  // quadrature weights for the marginal law, sum 1
};

// Grid of a marginal density on [a, b]: trapezoid weights against the density,
// normalized so they sum to exactly 1.
MarginalGrid density_grid(double a, double b, int n_points,
                          const std::function<double(double)>& density);

// Truth and design for the efficient-score computation. V and W independent;
// Z may be correlated with nothing here (its law is a finite atom list, which
// covers both continuous grids and Bernoulli components as products).
struct DesignSpec {
  MarginalGrid v;
  MarginalGrid w;
  Eigen::MatrixXd z_atoms;    // nz x d support points
  Eigen::VectorXd z_weights;  // sums to 1
  Eigen::VectorXd beta0;
  std::function<double(double)> h0;
  std::function<double(double)> H0;
  LinkFamily family = LinkFamily::extreme_value();

  int d() const { return static_cast<int>(beta0.size()); }
};

// The simulation-study design on the time scale: V truncated exponential on
// [0.2, 1.8], W uniform on [1, 10], Z = (uniform on [0.5, 1.5], Bernoulli 1/2),
// beta0 = (0.3, 0.25), h0(w) = sin(w/1.2 - 1) - k0, H0(v) = k0 + log(e^{v/3}-1).
DesignSpec study_design(int grid_points = 201);

// E[Q^2 | v, w, z] = f^2(theta) / (F (1-F)) at theta = beta0'z + h0(w) + H0(v),
// capped at 1e12.
double q_weight_sq(const DesignSpec& spec, double v, double w,
                   const Eigen::RowVectorXd& z);

using GridFunction = std::function<double(double, double)>;  // g(v, w)

// Q^2-weighted conditional expectations: project_pi1 conditions on V (returns
// values on the v grid), project_pi2 conditions on W.
Eigen::VectorXd project_pi1(const DesignSpec& spec, const GridFunction& g);
Eigen::VectorXd project_pi2(const DesignSpec& spec, const GridFunction& g);

struct HStarResult {
  Eigen::MatrixXd h_tilde;  // nw x d, centered: E h_tilde(W) = 0
  int terms = 0;
  double last_increment = 0.0;
};

// Geometric series of alternating projections applied to the centered
// regression of Z on (V, W); diverging increments (3 consecutive growths)
// raise NumericalError.
HStarResult hstar_series(const DesignSpec& spec, double tol = 1e-8,
                         int max_terms = 200);

struct EfficientScorePieces {
  Eigen::MatrixXd h_tilde;  // nw x d
  Eigen::MatrixXd q_tilde;  // nv x d
  Eigen::MatrixXd I0;       // d x d, symmetric positive definite
  int series_terms = 0;
  double series_increment = 0.0;
};

EfficientScorePieces efficient_information(const DesignSpec& spec,
                                           const HStarResult& hstar);

}  // namespace cstrans
