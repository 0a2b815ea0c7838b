#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "cstrans/data.hpp"
#include "cstrans/errors.hpp"
#include "cstrans/families.hpp"

namespace cstrans {

// Cumulative sum diagram: points (x_j, y_j) with an implicit origin (0, 0).
// x must be nondecreasing; exact ties are merged by summing y increments.
struct CusumDiagram {
  std::vector<double> x;
  std::vector<double> y;
};

// Nondecreasing step function with jumps at sites (strictly increasing),
// right-continuous, constant beyond the extreme sites.
class StepTransform {
 public:
  StepTransform() = default;  // identically zero
  StepTransform(std::vector<double> sites, std::vector<double> values);

  double operator()(double v) const;
  const std::vector<double>& sites() const { return sites_; }
  const std::vector<double>& values() const { return values_; }
  bool empty() const { return sites_.empty(); }

 private:
  std::vector<double> sites_;
  std::vector<double> values_;
};

// Left derivative of the greatest convex minorant of the diagram, evaluated at
// each x_j: the solution of the weighted isotonic regression with weights
// (x_j - x_{j-1}) and raw values (y_j - y_{j-1}) / (x_j - x_{j-1}).
std::vector<double> gcm_left_derivative(const CusumDiagram& diagram);

// Distribution-function values of the one-sample estimator at the sorted
// censoring times: the isotonic regression of delta with unit weights.
std::vector<double> npmle_single_sample(const std::vector<int>& delta_sorted);

// First index with delta = 1 and last index with delta = 0 (0-based, in
// v-order). Returns {-1, -1} when no delta=1 precedes a delta=0, i.e. when the
// step transform cannot be pinned down on any interval.
std::pair<int, int> informative_range(const Eigen::VectorXi& delta);

// Optimality gap of H for the monotone-step profile problem, computed over the
// informative range with offsets fixed: ineq is the largest upper-tail
// cumulative score sum (<= 0 at the optimum), eq is |sum_i q1_i H(v_i)| / n.
struct FenchelResiduals {
  double ineq;
  double eq;
};

FenchelResiduals fenchel_residuals(const Dataset& data,
                                   const Eigen::VectorXd& offsets,
                                   const StepTransform& H,
                                   const LinkFamily& family);

struct IcmOptions {
  double tol = 1e-6;      // Fenchel residual target
  int max_iter = 500;
  int max_halvings = 30;  // step halvings per iterate
};

struct IcmResult {
  StepTransform transform;
  double loglik;  // informative-range mean log-likelihood at the solution
  int iterations = 0;
  bool converged = false;
  FenchelResiduals residuals{};
};

// One profile maximization over H with (beta, h) frozen in the offsets:
// iterated convex minorant iterations on the self-induced diagram with
// curvature weights -q2, damped by step halving so the log-likelihood never
// decreases. init must be nondecreasing where it is evaluated.
IcmResult icm_h_step(const Dataset& data, const Eigen::VectorXd& offsets,
                     const LinkFamily& family, const StepTransform& init,
                     const IcmOptions& opts = {});

// Clamps H to its values at the first-informative and last-informative sites;
// returns the zero transform when informative_range fails.
StepTransform truncate_transform(const StepTransform& H,
                                 const std::vector<int>& delta_sorted);

}  // namespace cstrans
