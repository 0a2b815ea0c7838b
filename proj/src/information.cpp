#include "cstrans/information.hpp"

#include <cmath>

namespace cstrans {

MarginalGrid density_grid(double a, double b, int n_points,
                          const std::function<double(double)>& density) {
  if (n_points < 2) throw ConfigError("density_grid: need at least 2 points");
  if (!(b > a)) throw ConfigError("density_grid: need b > a");
  MarginalGrid grid;
  grid.points.resize(n_points);
  grid.weights.resize(n_points);
  const double step = (b - a) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) {
    const double x = i + 1 == n_points ? b : a + step * i;
    grid.points[i] = x;
    const double trap = (i == 0 || i + 1 == n_points) ? 0.5 : 1.0;
    grid.weights[i] = trap * density(x);
    if (!(grid.weights[i] >= 0.0))
      throw ConfigError("density_grid: density must be nonnegative");
  }
  const double total = grid.weights.sum();
  if (!(total > 0.0)) throw ConfigError("density_grid: density vanishes on grid");
  grid.weights /= total;
  return grid;
}

DesignSpec study_design(int grid_points) {
  const double k0 = 0.06516;
  DesignSpec spec;
  spec.v = density_grid(0.2, 1.8, grid_points,
                        [](double t) { return std::exp(-t); });
  spec.w = density_grid(1.0, 10.0, grid_points, [](double) { return 1.0; });

  // Z = (Z1, Z2) with Z1 uniform on a grid and Z2 Bernoulli(1/2) atoms.
  const MarginalGrid z1 = density_grid(0.5, 1.5, grid_points,
                                       [](double) { return 1.0; });
  const int nz1 = static_cast<int>(z1.points.size());
  spec.z_atoms.resize(2 * nz1, 2);
  spec.z_weights.resize(2 * nz1);
  for (int i = 0; i < nz1; ++i) {
    for (int b = 0; b < 2; ++b) {
      spec.z_atoms(2 * i + b, 0) = z1.points[i];
      spec.z_atoms(2 * i + b, 1) = b;
      spec.z_weights[2 * i + b] = 0.5 * z1.weights[i];
    }
  }

  spec.beta0 = Eigen::Vector2d(0.3, 0.25);
  spec.h0 = [k0](double w) { return std::sin(w / 1.2 - 1.0) - k0; };
  spec.H0 = [k0](double v) { return k0 + std::log(std::expm1(v / 3.0)); };
  spec.family = LinkFamily::extreme_value();
  return spec;
}

double q_weight_sq(const DesignSpec& spec, double v, double w,
                   const Eigen::RowVectorXd& z) {
  const double theta = spec.beta0.dot(z) + spec.h0(w) + spec.H0(v);
  const LinkEval e = spec.family.eval(theta);
  const double den = std::max(e.F * (1.0 - e.F), 1e-300);
  return std::min(e.f * e.f / den, kQDerivCap);
}

namespace {

// Everything the projections need, precomputed on the tensor grid:
// D0(v,w) = E_z[Q^2], D1(v,w,.) = E_z[Z Q^2], and the conditioning
// denominators E[Q^2 | v] and E[Q^2 | w].
struct InfoEngine {
  const DesignSpec& spec;
  int nv, nw, d;
  Eigen::MatrixXd d0;                // nv x nw
  std::vector<Eigen::MatrixXd> d1;   // per beta coordinate, nv x nw
  Eigen::VectorXd denom_v;           // nv: sum_w ww D0
  Eigen::VectorXd denom_w;           // nw: sum_v wv D0

  explicit InfoEngine(const DesignSpec& s)
      : spec(s),
        nv(static_cast<int>(s.v.points.size())),
        nw(static_cast<int>(s.w.points.size())),
        d(s.d()) {
    const int nz = static_cast<int>(s.z_atoms.rows());
    Eigen::VectorXd zshift(nz);
    for (int a = 0; a < nz; ++a)
      zshift[a] = s.beta0.dot(s.z_atoms.row(a));

    d0.setZero(nv, nw);
    d1.assign(d, Eigen::MatrixXd::Zero(nv, nw));
    for (int i = 0; i < nv; ++i) {
      const double hv = s.H0(s.v.points[i]);
      for (int j = 0; j < nw; ++j) {
        const double base = hv + s.h0(s.w.points[j]);
        double acc0 = 0.0;
        Eigen::VectorXd acc1 = Eigen::VectorXd::Zero(d);
        for (int a = 0; a < nz; ++a) {
          const double theta = base + zshift[a];
          const LinkEval e = s.family.eval(theta);
          const double den = std::max(e.F * (1.0 - e.F), 1e-300);
          const double qw = std::min(e.f * e.f / den, kQDerivCap);
          const double wz = s.z_weights[a] * qw;
          acc0 += wz;
          acc1 += wz * s.z_atoms.row(a).transpose();
        }
        d0(i, j) = acc0;
        for (int r = 0; r < d; ++r) d1[r](i, j) = acc1[r];
      }
    }
    denom_v = d0 * spec.w.weights;
    denom_w = d0.transpose() * spec.v.weights;
    if (denom_v.minCoeff() <= 0.0 || denom_w.minCoeff() <= 0.0)
      throw NumericalError("projection denominator vanished on the grid");
  }

  // Pi1 applied to a function of w alone (values on the w grid).
  Eigen::VectorXd pi1_of_w(const Eigen::VectorXd& t) const {
    return (d0 * spec.w.weights.cwiseProduct(t)).cwiseQuotient(denom_v);
  }
  // Pi2 applied to a function of v alone.
  Eigen::VectorXd pi2_of_v(const Eigen::VectorXd& s_) const {
    return (d0.transpose() * spec.v.weights.cwiseProduct(s_))
        .cwiseQuotient(denom_w);
  }
  // Pi1 of a general grid function supplied as an nv x nw matrix.
  Eigen::VectorXd pi1_of_vw(const Eigen::MatrixXd& g) const {
    return (g.cwiseProduct(d0) * spec.w.weights).cwiseQuotient(denom_v);
  }
  Eigen::VectorXd pi2_of_vw(const Eigen::MatrixXd& g) const {
    return (g.cwiseProduct(d0).transpose() * spec.v.weights)
        .cwiseQuotient(denom_w);
  }
};

Eigen::MatrixXd tabulate(const DesignSpec& spec, const GridFunction& g) {
  const int nv = static_cast<int>(spec.v.points.size());
  const int nw = static_cast<int>(spec.w.points.size());
  Eigen::MatrixXd values(nv, nw);
  for (int i = 0; i < nv; ++i)
    for (int j = 0; j < nw; ++j)
      values(i, j) = g(spec.v.points[i], spec.w.points[j]);
  return values;
}

}  // namespace

Eigen::VectorXd project_pi1(const DesignSpec& spec, const GridFunction& g) {
  const InfoEngine engine(spec);
  return engine.pi1_of_vw(tabulate(spec, g));
}

Eigen::VectorXd project_pi2(const DesignSpec& spec, const GridFunction& g) {
  const InfoEngine engine(spec);
  return engine.pi2_of_vw(tabulate(spec, g));
}

HStarResult hstar_series(const DesignSpec& spec, double tol, int max_terms) {
  const InfoEngine engine(spec);
  const int d = spec.d();

  HStarResult result;
  result.h_tilde.setZero(engine.nw, d);

  for (int r = 0; r < d; ++r) {
    // Seed term Pi2 (1 - Pi1) D*, with D* = D1/D0 the regression of Z on (v,w).
    const Eigen::MatrixXd dstar = engine.d1[r].cwiseQuotient(engine.d0);
    const Eigen::VectorXd pi1_dstar = engine.pi1_of_vw(dstar);
    Eigen::MatrixXd centered = dstar;
    centered.colwise() -= pi1_dstar;
    Eigen::VectorXd term = engine.pi2_of_vw(centered);

    Eigen::VectorXd h = term;
    double prev_norm = term.lpNorm<Eigen::Infinity>();
    int growth_streak = 0;
    result.terms = 1;
    result.last_increment = prev_norm;
    for (int t = 2; t <= max_terms && prev_norm > tol; ++t) {
      term = engine.pi2_of_v(engine.pi1_of_w(term));
      h += term;
      const double norm = term.lpNorm<Eigen::Infinity>();
      growth_streak = norm > prev_norm ? growth_streak + 1 : 0;
      if (growth_streak >= 3)
        throw NumericalError(
            "hstar_series: increments are growing, projections do not "
            "contract on this design");
      prev_norm = norm;
      result.terms = t;
      result.last_increment = norm;
    }
    result.h_tilde.col(r) = h;
  }

  // Center against the W marginal.
  const Eigen::RowVectorXd mean = spec.w.weights.transpose() * result.h_tilde;
  result.h_tilde.rowwise() -= mean;
  return result;
}

EfficientScorePieces efficient_information(const DesignSpec& spec,
                                           const HStarResult& hstar) {
  const InfoEngine engine(spec);
  const int d = spec.d();
  const int nz = static_cast<int>(spec.z_atoms.rows());
  if (hstar.h_tilde.rows() != engine.nw || hstar.h_tilde.cols() != d)
    throw ConfigError("efficient_information: h_tilde grid mismatch");

  EfficientScorePieces pieces;
  pieces.h_tilde = hstar.h_tilde;
  pieces.series_terms = hstar.terms;
  pieces.series_increment = hstar.last_increment;

  // q_tilde(v) = Pi1 Z - Pi1 h_tilde, both ratios of quadrature sums.
  pieces.q_tilde.resize(engine.nv, d);
  for (int r = 0; r < d; ++r) {
    const Eigen::VectorXd pi1_z =
        (engine.d1[r] * spec.w.weights).cwiseQuotient(engine.denom_v);
    pieces.q_tilde.col(r) = pi1_z - engine.pi1_of_w(hstar.h_tilde.col(r));
  }

  Eigen::VectorXd zshift(nz);
  for (int a = 0; a < nz; ++a) zshift[a] = spec.beta0.dot(spec.z_atoms.row(a));

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd resid(d);
  for (int i = 0; i < engine.nv; ++i) {
    const double hv = spec.H0(spec.v.points[i]);
    for (int j = 0; j < engine.nw; ++j) {
      const double base = hv + spec.h0(spec.w.points[j]);
      const double wvw = spec.v.weights[i] * spec.w.weights[j];
      for (int a = 0; a < nz; ++a) {
        const double theta = base + zshift[a];
        const LinkEval e = spec.family.eval(theta);
        const double den = std::max(e.F * (1.0 - e.F), 1e-300);
        const double qw = std::min(e.f * e.f / den, kQDerivCap);
        resid = spec.z_atoms.row(a).transpose();
        resid -= pieces.h_tilde.row(j).transpose();
        resid -= pieces.q_tilde.row(i).transpose();
        info.noalias() += (wvw * spec.z_weights[a] * qw) * resid * resid.transpose();
      }
    }
  }
  pieces.I0 = 0.5 * (info + info.transpose());

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pieces.I0);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError(
        "efficient information is not positive definite on this design");
  return pieces;
}

}  // namespace cstrans
