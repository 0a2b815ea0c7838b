#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cstrans/data.hpp"
#include "cstrans/families.hpp"
#include "cstrans/isotonic.hpp"
#include "cstrans/splines.hpp"

namespace cstrans {

struct ModelParams {
  Eigen::VectorXd beta;
  SmoothEffect h;
  StepTransform H;

  // Linear predictor beta'z + h(w) + H(v) for one record.
  double predictor(const Eigen::RowVectorXd& z, double w, double v) const {
    return beta.dot(z) + h(w) + H(v);
  }
};

struct FitConfig {
  double lambda = -1.0;         // < 0: n^(-1/3)
  int interior_knots = -1;      // < 0: basis_count(n, knot_multiplier)
  double knot_multiplier = 2.0;
  double outer_tol = 1e-8;      // relative objective change across a sweep
  int max_outer = 200;
  double inner_tol = 1e-8;      // Newton gradient norm target
  int max_newton = 50;
  double ridge_floor = 1e-10;
  double stat_tol = 1e-6;       // stationarity required to declare convergence
  IcmOptions icm{};
  std::uint64_t seed = 0;

  // Warm start: reuse parameters and basis from a previous fit (jackknife).
  const ModelParams* warm = nullptr;
  const SplineBasis* shared_basis = nullptr;
};

struct FitDiagnostics {
  std::vector<double> objective_trace;  // after every accepted half-step
  double fenchel_ineq = 0.0;
  double fenchel_eq = 0.0;
  double grad_norm = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct FitResult {
  ModelParams params;
  double loglik = 0.0;     // mean log-likelihood over all rows at the solution
  double penalty = 0.0;    // lambda^2 * integral of h'' squared
  double objective = 0.0;  // loglik - penalty
  double lambda = 0.0;
  FitDiagnostics diag;
};

// Mean log-likelihood (1/n) sum_i q(delta_i, predictor_i) over all rows.
double loglik(const Dataset& data, const ModelParams& params,
              const LinkFamily& family);

double penalized_objective(const Dataset& data, const ModelParams& params,
                           const LinkFamily& family, double lambda,
                           const Eigen::MatrixXd& omega);

// Gradient and Hessian of the penalized objective in (beta, spline coeffs),
// holding H fixed. The centering offset is treated as a function of the
// coefficients (offset = mean basis row . coeffs over this data).
struct ScoreHessian {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};
ScoreHessian score_and_hessian(const Dataset& data, const ModelParams& params,
                               const LinkFamily& family, double lambda);

// Damped Newton ascent over (beta, coeffs) with H frozen; ridge escalated from
// ridge_floor until the proposed step ascends, backtracking on the penalized
// objective; h re-centered on the sample. Returns the updated parameters.
struct NewtonReport {
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};
NewtonReport beta_h_step(const Dataset& data, ModelParams& params,
                         const LinkFamily& family, double lambda,
                         const FitConfig& config);

// Penalized maximum likelihood by alternating the monotone-transform update
// (icm_h_step) with the Euclidean/spline Newton update (beta_h_step).
FitResult fit(const Dataset& data, const LinkFamily& family,
              const FitConfig& config = {});

}  // namespace cstrans
