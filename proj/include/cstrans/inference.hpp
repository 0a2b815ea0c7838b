#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cstrans/data.hpp"
#include "cstrans/families.hpp"
#include "cstrans/fit.hpp"

namespace cstrans {

// Quantile of the F distribution with (d1, d2) degrees of freedom: numeric
// inversion of the regularized incomplete beta function, abs tolerance 1e-10.
double f_quantile(double d1, double d2, double p);

struct JackknifeConfig {
  int m = 10;              // number of blocks; must exceed the dimension of beta
  double level = 0.95;
  bool center_at_full = false;  // scatter deviations taken from the full-sample
                                // estimate instead of the block mean
  std::uint64_t seed = 0;
  FitConfig fit{};
};

// Scatter matrix (m-1) * k * sum_j (beta_j - center)(beta_j - center)'.
Eigen::MatrixXd jackknife_scatter(const Eigen::MatrixXd& block_betas,
                                  const Eigen::VectorXd& center, int k);

struct JackknifeResult {
  Eigen::VectorXd beta_hat;     // full-data estimate
  Eigen::MatrixXd block_betas;  // m x d, one refit per omitted block
  Eigen::MatrixXd scatter;      // the scaled deviation scatter
  int n = 0;                    // full sample size
  int m = 0;                    // blocks
  int k = 0;                    // floor(n / m)
  int n_used = 0;               // m * k rows entering the block scheme
  double level = 0.95;
  bool reliable = true;         // all refits converged
  std::vector<int> failed_blocks;

  int dim() const { return static_cast<int>(beta_hat.size()); }

  // n (beta_hat - beta0)' scatter^{-1} (beta_hat - beta0)
  double statistic(const Eigen::VectorXd& beta0) const;

  // Reference quantile d(m-1)/(m-d) F_{d, m-d}(level).
  double critical(double lvl) const;

  bool covers(const Eigen::VectorXd& beta0) const {
    return statistic(beta0) <= critical(level);
  }

  // Marginal interval half width for coordinate r at the stored level:
  // sqrt(scatter_rr * F_{1, m-1}(level) / n).
  double marginal_halfwidth(int r) const;

  bool covers_marginal(int r, double beta0_r) const {
    return std::abs(beta_hat[r] - beta0_r) <= marginal_halfwidth(r);
  }
};

JackknifeResult block_jackknife(const Dataset& data, const LinkFamily& family,
                                const JackknifeConfig& config);

// Ellipsoid {beta : n (beta_hat - beta)' scatter^{-1} (beta_hat - beta) <= c}.
struct ConfidenceRegion {
  Eigen::VectorXd center;
  Eigen::MatrixXd scatter;
  int n = 0;
  double radius2 = 0.0;  // the critical value c

  bool contains(const Eigen::VectorXd& beta) const;
};

ConfidenceRegion confidence_region(const JackknifeResult& result, double level);

}  // namespace cstrans
