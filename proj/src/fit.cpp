#include "cstrans/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cstrans {

namespace {

// Design shared by the public derivative ops and the fit driver: columns are
// [z | basis row - mean basis row], so the smooth term is centered on the
// sample by construction and the coefficient gradient is exact.
struct Design {
  Eigen::MatrixXd X;           // n x (d + K)
  Eigen::RowVectorXd bbar;     // mean basis row
  Eigen::MatrixXd omega;
  int d = 0;
  int K = 0;
};

Design build_design(const Dataset& data, const SplineBasis& basis) {
  Design dz;
  dz.d = data.d();
  dz.K = basis.size();
  const int n = data.n();
  Eigen::MatrixXd braw(n, dz.K);
  for (int i = 0; i < n; ++i) braw.row(i) = basis.eval(data.w[i]).transpose();
  dz.bbar = braw.colwise().mean();
  dz.X.resize(n, dz.d + dz.K);
  dz.X.leftCols(dz.d) = data.z;
  dz.X.rightCols(dz.K) = braw.rowwise() - dz.bbar;
  dz.omega = basis.penalty();
  return dz;
}

// Penalized mean log-likelihood over rows [lo, hi] with everything but the
// (beta, coeffs) vector frozen. hrow holds H(v_i) per row.
double masked_objective(const Dataset& data, const LinkFamily& family,
                        const Design& dz, const Eigen::VectorXd& coef,
                        const Eigen::VectorXd& hrow, int lo, int hi,
                        double lambda2) {
  const int m = hi - lo + 1;
  const Eigen::VectorXd theta =
      dz.X.middleRows(lo, m) * coef + hrow.segment(lo, m);
  double sum = 0.0;
  for (int i = 0; i < m; ++i)
    sum += family.q(data.delta[lo + i], theta[i]).q;
  const Eigen::VectorXd c = coef.tail(dz.K);
  return sum / static_cast<double>(data.n()) - lambda2 * c.dot(dz.omega * c);
}

struct NewtonCore {
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

// Damped Newton ascent on rows [lo, hi]; coef updated in place.
NewtonCore newton_core(const Dataset& data, const LinkFamily& family,
                       const Design& dz, Eigen::VectorXd& coef,
                       const Eigen::VectorXd& hrow, int lo, int hi,
                       double lambda2, double tol, int max_iter,
                       double ridge_floor) {
  NewtonCore rep;
  const int m = hi - lo + 1;
  const int p = dz.d + dz.K;
  const double n = static_cast<double>(data.n());
  const auto Xb = dz.X.middleRows(lo, m);

  Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(p, p);
  pen.bottomRightCorner(dz.K, dz.K) = 2.0 * lambda2 * dz.omega;

  double obj = masked_objective(data, family, dz, coef, hrow, lo, hi, lambda2);

  for (int iter = 1; iter <= max_iter; ++iter) {
    rep.iterations = iter;
    const Eigen::VectorXd theta = Xb * coef + hrow.segment(lo, m);
    Eigen::VectorXd q1(m), q2(m);
    for (int i = 0; i < m; ++i) {
      const QEval qe = family.q(data.delta[lo + i], theta[i]);
      q1[i] = qe.q1;
      q2[i] = qe.q2;
    }
    Eigen::VectorXd grad = Xb.transpose() * q1 / n;
    grad.tail(dz.K) -= 2.0 * lambda2 * (dz.omega * coef.tail(dz.K));
    rep.grad_norm = grad.norm();
    if (rep.grad_norm <= tol) {
      rep.converged = true;
      break;
    }

    Eigen::MatrixXd neg_hess =
        -(Xb.transpose() * q2.asDiagonal() * Xb) / n + pen;

    // Ridge escalation until the proposed step is a usable ascent direction.
    double ridge = ridge_floor;
    Eigen::VectorXd step;
    bool have_step = false;
    for (int tries = 0; tries < 60; ++tries, ridge *= 10.0) {
      Eigen::MatrixXd A = neg_hess;
      A.diagonal().array() += ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      if (ldlt.info() != Eigen::Success) continue;
      step = ldlt.solve(grad);
      if (step.allFinite() && grad.dot(step) > 0.0) {
        have_step = true;
        break;
      }
    }
    if (!have_step)
      throw NumericalError("beta_h_step: no ascent direction found");

    bool moved = false;
    double lam = 1.0;
    for (int h = 0; h <= 30; ++h, lam *= 0.5) {
      const Eigen::VectorXd trial = coef + lam * step;
      const double obj_try =
          masked_objective(data, family, dz, trial, hrow, lo, hi, lambda2);
      if (std::isfinite(obj_try) && obj_try >= obj) {
        coef = trial;
        obj = obj_try;
        moved = true;
        break;
      }
    }
    if (!moved) break;  // stalled at floating-point resolution
  }
  return rep;
}

Eigen::VectorXd pack(const ModelParams& params) {
  Eigen::VectorXd coef(params.beta.size() + params.h.coeffs.size());
  coef << params.beta, params.h.coeffs;
  return coef;
}

// Stationarity polish: joint damped Newton over (beta, coeffs, block levels
// of H) with the block structure frozen. Once the alternation stalls, the
// remaining error lies along a direction coupling the transform with the
// regression part, which the block updates contract too slowly; the joint
// step removes it directly. The block count is small near the solution, so
// the extra system is cheap. Steps that break the strict level ordering are
// shortened, and the polish hands back to the alternation when no usable
// step remains. Returns the (beta, coeffs) gradient norm at exit.
double joint_polish(const Dataset& data, const LinkFamily& family,
                    const Design& dz, Eigen::VectorXd& coef, StepTransform& H,
                    int lo, int hi, double lambda2, const FitConfig& config) {
  const double n = static_cast<double>(data.n());
  const int p = dz.d + dz.K;
  const int m = hi - lo + 1;

  std::vector<double> sites;
  std::vector<int> site_of_row(m);
  for (int i = lo; i <= hi; ++i) {
    if (sites.empty() || data.v[i] > sites.back()) sites.push_back(data.v[i]);
    site_of_row[i - lo] = static_cast<int>(sites.size()) - 1;
  }
  std::vector<double> hv(sites.size());
  for (std::size_t s = 0; s < sites.size(); ++s) hv[s] = H(sites[s]);
  std::vector<int> block_of(sites.size());
  std::vector<double> levels;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    if (levels.empty() || hv[s] > levels.back()) levels.push_back(hv[s]);
    block_of[s] = static_cast<int>(levels.size()) - 1;
  }
  const int B = static_cast<int>(levels.size());
  const auto Xm = dz.X.middleRows(lo, m);
  std::vector<int> row_block(m);
  for (int r = 0; r < m; ++r) row_block[r] = block_of[site_of_row[r]];

  Eigen::VectorXd phi(p + B);
  phi.head(p) = coef;
  for (int b = 0; b < B; ++b) phi[p + b] = levels[b];

  auto objective = [&](const Eigen::VectorXd& ph) {
    const Eigen::VectorXd lin = Xm * ph.head(p);
    double sum = 0.0;
    for (int r = 0; r < m; ++r)
      sum += family.q(data.delta[lo + r], lin[r] + ph[p + row_block[r]]).q;
    const auto c = ph.segment(dz.d, dz.K);
    return sum / n - lambda2 * c.dot(dz.omega * c);
  };
  auto ordered = [&](const Eigen::VectorXd& ph) {
    for (int b = 1; b < B; ++b)
      if (!(ph[p + b] > ph[p + b - 1])) return false;
    return true;
  };

  double obj = objective(phi);
  double coef_grad_norm = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.max_newton; ++iter) {
    const Eigen::VectorXd lin = Xm * phi.head(p);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + B);
    Eigen::MatrixXd neg_hess = Eigen::MatrixXd::Zero(p + B, p + B);
    Eigen::VectorXd q2v(m);
    for (int r = 0; r < m; ++r) {
      const int b = row_block[r];
      const QEval qe = family.q(data.delta[lo + r], lin[r] + phi[p + b]);
      q2v[r] = qe.q2;
      grad.head(p) += (qe.q1 / n) * Xm.row(r).transpose();
      grad[p + b] += qe.q1 / n;
      neg_hess.col(p + b).head(p) -= (qe.q2 / n) * Xm.row(r).transpose();
      neg_hess(p + b, p + b) -= qe.q2 / n;
    }
    neg_hess.topLeftCorner(p, p) = -(Xm.transpose() * q2v.asDiagonal() * Xm) / n;
    neg_hess.block(dz.d, dz.d, dz.K, dz.K) += 2.0 * lambda2 * dz.omega;
    neg_hess.bottomLeftCorner(B, p) = neg_hess.topRightCorner(p, B).transpose();
    grad.segment(dz.d, dz.K) -=
        2.0 * lambda2 * (dz.omega * phi.segment(dz.d, dz.K));

    coef_grad_norm = grad.head(p).norm();
    if (grad.norm() <= config.inner_tol) break;

    double ridge = config.ridge_floor;
    Eigen::VectorXd step;
    bool have_step = false;
    for (int tries = 0; tries < 60; ++tries, ridge *= 10.0) {
      Eigen::MatrixXd A = neg_hess;
      A.diagonal().array() += ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      if (ldlt.info() != Eigen::Success) continue;
      step = ldlt.solve(grad);
      if (step.allFinite() && grad.dot(step) > 0.0) {
        have_step = true;
        break;
      }
    }
    if (!have_step) break;

    bool moved = false;
    double lam = 1.0;
    for (int h = 0; h <= 30; ++h, lam *= 0.5) {
      const Eigen::VectorXd trial = phi + lam * step;
      if (!ordered(trial)) continue;
      const double obj_try = objective(trial);
      if (std::isfinite(obj_try) && obj_try >= obj) {
        phi = trial;
        obj = obj_try;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  coef = phi.head(p);
  for (std::size_t s = 0; s < sites.size(); ++s) hv[s] = phi[p + block_of[s]];
  H = StepTransform(sites, hv);
  return coef_grad_norm;
}

}  // namespace

double loglik(const Dataset& data, const ModelParams& params,
              const LinkFamily& family) {
  double sum = 0.0;
  for (int i = 0; i < data.n(); ++i)
    sum += family
               .q(data.delta[i],
                  params.predictor(data.z.row(i), data.w[i], data.v[i]))
               .q;
  return sum / static_cast<double>(data.n());
}

double penalized_objective(const Dataset& data, const ModelParams& params,
                           const LinkFamily& family, double lambda,
                           const Eigen::MatrixXd& omega) {
  return loglik(data, params, family) -
         lambda * lambda * params.h.roughness(omega);
}

ScoreHessian score_and_hessian(const Dataset& data, const ModelParams& params,
                               const LinkFamily& family, double lambda) {
  const Design dz = build_design(data, params.h.basis);
  Eigen::VectorXd hrow(data.n());
  for (int i = 0; i < data.n(); ++i) hrow[i] = params.H(data.v[i]);
  const Eigen::VectorXd coef = pack(params);
  const int n = data.n();
  const double nn = static_cast<double>(n);
  const Eigen::VectorXd theta = dz.X * coef + hrow;
  Eigen::VectorXd q1(n), q2(n);
  for (int i = 0; i < n; ++i) {
    const QEval qe = family.q(data.delta[i], theta[i]);
    q1[i] = qe.q1;
    q2[i] = qe.q2;
  }
  ScoreHessian sh;
  sh.gradient = dz.X.transpose() * q1 / nn;
  sh.hessian = dz.X.transpose() * q2.asDiagonal() * dz.X / nn;
  const double l2 = lambda * lambda;
  sh.gradient.tail(dz.K) -= 2.0 * l2 * (dz.omega * coef.tail(dz.K));
  sh.hessian.bottomRightCorner(dz.K, dz.K) -= 2.0 * l2 * dz.omega;
  sh.hessian = (0.5 * (sh.hessian + sh.hessian.transpose())).eval();
  return sh;
}

NewtonReport beta_h_step(const Dataset& data, ModelParams& params,
                         const LinkFamily& family, double lambda,
                         const FitConfig& config) {
  const Design dz = build_design(data, params.h.basis);
  Eigen::VectorXd hrow(data.n());
  for (int i = 0; i < data.n(); ++i) hrow[i] = params.H(data.v[i]);
  Eigen::VectorXd coef = pack(params);
  const NewtonCore core =
      newton_core(data, family, dz, coef, hrow, 0, data.n() - 1,
                  lambda * lambda, config.inner_tol, config.max_newton,
                  config.ridge_floor);
  params.beta = coef.head(dz.d);
  params.h.coeffs = coef.tail(dz.K);
  params.h.center_offset = dz.bbar.dot(params.h.coeffs);
  NewtonReport rep;
  rep.iterations = core.iterations;
  rep.grad_norm = core.grad_norm;
  rep.converged = core.converged;
  return rep;
}

FitResult fit(const Dataset& data, const LinkFamily& family,
              const FitConfig& config) {
  const int n = data.n();
  const int d = data.d();
  const auto [lo, hi] = informative_range(data.delta);
  if (lo < 0)
    throw NumericalError(
        "fit: degenerate censoring pattern (no event precedes a censoring-"
        "free observation), the step transform is unbounded");

  const double lambda =
      config.lambda < 0.0 ? std::pow(static_cast<double>(n), -1.0 / 3.0)
                          : config.lambda;
  const double lambda2 = lambda * lambda;

  SplineBasis basis = [&]() -> SplineBasis {
    if (config.shared_basis) return *config.shared_basis;
    if (config.warm) return config.warm->h.basis;
    const int k_int = config.interior_knots > 0
                          ? config.interior_knots
                          : basis_count(n, config.knot_multiplier);
    std::vector<double> wv(data.w.data(), data.w.data() + n);
    const auto knots = select_knots(wv, k_int, config.seed);
    return SplineBasis(data.w.minCoeff(), data.w.maxCoeff(), knots);
  }();

  const Design dz = build_design(data, basis);
  const int p = d + dz.K;

  Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
  if (config.warm) {
    if (config.warm->beta.size() != d ||
        config.warm->h.coeffs.size() != dz.K)
      throw ConfigError("fit: warm start dimensions do not match");
    coef.head(d) = config.warm->beta;
    coef.tail(dz.K) = config.warm->h.coeffs;
  }

  // Initial transform: quantile-mapped isotonic fit of delta over the
  // informative range, clamped away from 0 and 1; warm starts reuse the
  // previous transform instead.
  StepTransform H;
  if (config.warm) {
    H = config.warm->H;
  } else {
    CusumDiagram cumsum;
    std::vector<double> sites;
    double cx = 0.0, cy = 0.0;
    for (int i = lo; i <= hi; ++i) {
      cx += 1.0;
      cy += data.delta[i];
      if (!sites.empty() && data.v[i] == sites.back()) {
        cumsum.x.back() = cx;
        cumsum.y.back() = cy;
      } else {
        sites.push_back(data.v[i]);
        cumsum.x.push_back(cx);
        cumsum.y.push_back(cy);
      }
    }
    std::vector<double> probs = gcm_left_derivative(cumsum);
    const double pl = 1.0 / (n + 1.0), ph = n / (n + 1.0);
    std::vector<double> hv(probs.size());
    for (std::size_t s = 0; s < probs.size(); ++s)
      hv[s] = family.quantile(std::clamp(probs[s], pl, ph));
    H = StepTransform(sites, hv);
  }

  Eigen::VectorXd hrow(n);
  auto refresh_hrow = [&]() {
    for (int i = 0; i < n; ++i) hrow[i] = H(data.v[i]);
  };
  refresh_hrow();

  FitResult result;
  result.lambda = lambda;
  auto& trace = result.diag.objective_trace;
  trace.push_back(masked_objective(data, family, dz, coef, hrow, lo, hi, lambda2));

  double obj_prev = trace.front();
  FenchelResiduals fen{std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity()};
  double grad_norm = std::numeric_limits<double>::infinity();

  for (int outer = 1; outer <= config.max_outer; ++outer) {
    result.diag.outer_iterations = outer;

    // S1: monotone-transform update with offsets frozen.
    const Eigen::VectorXd offsets = dz.X * coef;
    const IcmResult icm = icm_h_step(data, offsets, family, H, config.icm);
    H = icm.transform;
    refresh_hrow();
    trace.push_back(masked_objective(data, family, dz, coef, hrow, lo, hi, lambda2));

    // S2: Newton update of (beta, coeffs) with the transform frozen.
    const NewtonCore core =
        newton_core(data, family, dz, coef, hrow, lo, hi, lambda2,
                    config.inner_tol, config.max_newton, config.ridge_floor);
    grad_norm = core.grad_norm;
    const double obj = masked_objective(data, family, dz, coef, hrow, lo, hi, lambda2);
    trace.push_back(obj);

    // Joint stationarity at the current point decides convergence. Once the
    // per-sweep gain is small the alternation is only crawling along a
    // coupled direction, so the joint polish finishes the job instead.
    fen = fenchel_residuals(data, dz.X * coef, H, family);
    const bool slow = std::abs(obj - obj_prev) <= 1e-5 * (1.0 + std::abs(obj));
    obj_prev = obj;
    bool stationary = fen.ineq <= config.stat_tol &&
                      fen.eq <= config.stat_tol &&
                      grad_norm <= config.stat_tol;
    if (slow && !stationary) {
      grad_norm = joint_polish(data, family, dz, coef, H, lo, hi, lambda2,
                               config);
      refresh_hrow();
      obj_prev = masked_objective(data, family, dz, coef, hrow, lo, hi, lambda2);
      trace.push_back(obj_prev);
      fen = fenchel_residuals(data, dz.X * coef, H, family);
      stationary = fen.ineq <= config.stat_tol && fen.eq <= config.stat_tol &&
                   grad_norm <= config.stat_tol;
    }
    if (stationary) {
      result.diag.converged = true;
      break;
    }
  }

  result.params.beta = coef.head(d);
  result.params.h = SmoothEffect{basis, coef.tail(dz.K), 0.0};
  result.params.h.center_offset = dz.bbar.dot(result.params.h.coeffs);
  result.params.H = H;
  result.diag.fenchel_ineq = fen.ineq;
  result.diag.fenchel_eq = fen.eq;
  result.diag.grad_norm = grad_norm;

  result.loglik = loglik(data, result.params, family);
  result.penalty = lambda2 * result.params.h.roughness(dz.omega);
  result.objective = result.loglik - result.penalty;

  double sup_h = 0.0;
  for (int i = 0; i < n; ++i)
    sup_h = std::max(sup_h, std::abs(dz.X.row(i).tail(dz.K).dot(coef.tail(dz.K))));
  if (sup_h > 10.0)
    result.diag.warnings.push_back(
        "smooth term exceeds 10 in absolute value; fit may be unstable");
  if (!result.diag.converged)
    result.diag.warnings.push_back("fit did not converge within max_outer");
  return result;
}

}  // namespace cstrans
