#include "cstrans/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>

#include "cstrans/rng.hpp"

namespace cstrans {

double f_quantile(double d1, double d2, double p) {
  if (!(d1 > 0.0 && d2 > 0.0)) throw ConfigError("f_quantile: df must be positive");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("f_quantile: p must be in (0,1)");
  const boost::math::fisher_f dist(d1, d2);
  return boost::math::quantile(dist, p);
}

Eigen::MatrixXd jackknife_scatter(const Eigen::MatrixXd& block_betas,
                                  const Eigen::VectorXd& center, int k) {
  const int m = static_cast<int>(block_betas.rows());
  const int d = static_cast<int>(block_betas.cols());
  if (center.size() != d) throw ConfigError("jackknife_scatter: center dimension");
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd dev = block_betas.row(j).transpose() - center;
    s.noalias() += dev * dev.transpose();
  }
  return static_cast<double>(m - 1) * static_cast<double>(k) * s;
}

double JackknifeResult::statistic(const Eigen::VectorXd& beta0) const {
  if (beta0.size() != beta_hat.size())
    throw ConfigError("jackknife statistic: beta0 dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("jackknife scatter matrix is singular");
  const Eigen::VectorXd diff = beta_hat - beta0;
  const Eigen::VectorXd sol = es.eigenvectors() *
                              (es.eigenvectors().transpose() * diff).cwiseQuotient(
                                  es.eigenvalues());
  return static_cast<double>(n) * diff.dot(sol);
}

double JackknifeResult::critical(double lvl) const {
  const int d = dim();
  if (m <= d) throw ConfigError("jackknife: m must exceed dim(beta)");
  return static_cast<double>(d) * static_cast<double>(m - 1) /
         static_cast<double>(m - d) * f_quantile(d, m - d, lvl);
}

double JackknifeResult::marginal_halfwidth(int r) const {
  if (r < 0 || r >= dim()) throw ConfigError("jackknife: coordinate out of range");
  return std::sqrt(scatter(r, r) * f_quantile(1.0, m - 1.0, level) /
                   static_cast<double>(n));
}

JackknifeResult block_jackknife(const Dataset& data, const LinkFamily& family,
                                const JackknifeConfig& config) {
  const int n = data.n();
  const int d = data.d();
  const int m = config.m;
  if (m <= d)
    throw ConfigError("block_jackknife: m must exceed the number of z columns");
  const int k = n / m;
  if (k < 1) throw ConfigError("block_jackknife: more blocks than observations");
  const int n_used = m * k;

  const FitResult full = fit(data, family, config.fit);

  // Random subsample of size m*k without replacement (a permutation when
  // m divides n); block j omits subsample positions j, m+j, ..., (k-1)m+j.
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(config.seed, 0xb10c);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }

  JackknifeResult result;
  result.beta_hat = full.params.beta;
  result.block_betas.resize(m, d);
  result.n = n;
  result.m = m;
  result.k = k;
  result.n_used = n_used;
  result.level = config.level;

  FitConfig refit_config = config.fit;
  refit_config.warm = &full.params;
  refit_config.shared_basis = &full.params.h.basis;

  for (int j = 0; j < m; ++j) {
    std::vector<char> omit(n_used, 0);
    for (int i = 0; i < k; ++i) omit[i * m + j] = 1;
    std::vector<int> rows;
    rows.reserve(n_used - k);
    for (int i = 0; i < n_used; ++i)
      if (!omit[i]) rows.push_back(perm[i]);
    const Dataset sub = data.subset(rows);
    const FitResult refit = fit(sub, family, refit_config);
    result.block_betas.row(j) = refit.params.beta.transpose();
    if (!refit.diag.converged) {
      result.failed_blocks.push_back(j);
      result.reliable = false;
    }
  }

  Eigen::VectorXd center;
  if (config.center_at_full) {
    if (n_used == n) {
      center = full.params.beta;
    } else {
      std::vector<int> rows(perm.begin(), perm.begin() + n_used);
      const FitResult sub_fit = fit(data.subset(rows), family, refit_config);
      center = sub_fit.params.beta;
    }
  } else {
    center = result.block_betas.colwise().mean().transpose();
  }
  result.scatter = jackknife_scatter(result.block_betas, center, k);
  if (!full.diag.converged) result.reliable = false;
  return result;
}

bool ConfidenceRegion::contains(const Eigen::VectorXd& beta) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("confidence region scatter matrix is singular");
  const Eigen::VectorXd diff = center - beta;
  const Eigen::VectorXd sol = es.eigenvectors() *
                              (es.eigenvectors().transpose() * diff).cwiseQuotient(
                                  es.eigenvalues());
  return static_cast<double>(n) * diff.dot(sol) <= radius2;
}

ConfidenceRegion confidence_region(const JackknifeResult& result, double level) {
  ConfidenceRegion region;
  region.center = result.beta_hat;
  region.scatter = result.scatter;
  region.n = result.n;
  region.radius2 = result.critical(level);
  return region;
}

}  // namespace cstrans
