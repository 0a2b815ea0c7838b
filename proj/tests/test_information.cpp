#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "cstrans/errors.hpp"
#include "cstrans/families.hpp"
#include "cstrans/information.hpp"
#include "cstrans/rng.hpp"

using cstrans::DesignSpec;
using cstrans::LinkFamily;
using cstrans::MarginalGrid;

namespace {

int index_of(const Eigen::VectorXd& points, double value) {
  for (int i = 0; i < points.size(); ++i)
    if (points[i] == value) return i;
  REQUIRE(false);
  return -1;
}

// One-covariate design with independent Z in {z_lo, z_hi} and the study's
// marginal laws; beta0 = 0 makes the weight Q^2 free of z.
DesignSpec binary_z_spec(double beta0, double z_lo, double z_hi,
                         int grid = 31) {
  DesignSpec spec;
  spec.v = cstrans::density_grid(0.2, 1.8, grid, [](double t) {
    return std::exp(-t);  // truncated exponential, normalization is internal
  });
  spec.w = cstrans::density_grid(1.0, 10.0, grid, [](double) { return 1.0; });
  spec.z_atoms.resize(2, 1);
  spec.z_atoms << z_lo, z_hi;
  spec.z_weights = Eigen::Vector2d(0.5, 0.5);
  spec.beta0 = Eigen::VectorXd::Constant(1, beta0);
  spec.h0 = [](double w) { return std::sin(w / 1.2 - 1.0); };
  spec.H0 = [](double v) { return std::log(std::expm1(v / 3.0)); };
  spec.family = LinkFamily::extreme_value();
  return spec;
}

// Test-local conditional expectation of Z given (v, w), weighted by Q^2.
double dstar_direct(const DesignSpec& spec, double v, double w) {
  double num = 0.0, den = 0.0;
  for (int k = 0; k < spec.z_atoms.rows(); ++k) {
    const double q2 = cstrans::q_weight_sq(spec, v, w, spec.z_atoms.row(k));
    num += spec.z_weights[k] * spec.z_atoms(k, 0) * q2;
    den += spec.z_weights[k] * q2;
  }
  return num / den;
}

}  // namespace

TEST_CASE("density grid: trapezoid weights on a uniform law") {
  const auto grid = cstrans::density_grid(0.0, 2.0, 5, [](double) { return 3.0; });
  REQUIRE(grid.points.size() == 5);
  CHECK(grid.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
  // Interior weights double the endpoint weights for a flat density.
  CHECK(grid.weights[0] == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(grid.weights[2] == doctest::Approx(0.25).epsilon(1e-12));
  // Trapezoid integrates linear functions of a uniform law exactly.
  CHECK(grid.points.dot(grid.weights) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(cstrans::density_grid(0.0, 2.0, 1, [](double) { return 1.0; }),
                  cstrans::ConfigError);
  CHECK_THROWS_AS(cstrans::density_grid(2.0, 0.0, 5, [](double) { return 1.0; }),
                  cstrans::ConfigError);
  CHECK_THROWS_AS(
      cstrans::density_grid(0.0, 2.0, 5, [](double) { return -1.0; }),
      cstrans::ConfigError);
}

TEST_CASE("squared score weight: logistic closed form and MC check") {
  DesignSpec spec = binary_z_spec(0.0, 0.0, 0.0);
  spec.family = LinkFamily::logistic();
  spec.h0 = [](double) { return 0.0; };
  spec.H0 = [](double) { return 0.0; };
  // theta = 0: f^2 / (F(1-F)) = (1/16) / (1/4).
  CHECK(cstrans::q_weight_sq(spec, 1.0, 5.0, spec.z_atoms.row(0)) ==
        doctest::Approx(0.25).epsilon(1e-14));

  // Monte Carlo route at a generic point of the study design.
  const auto study = cstrans::study_design(41);
  const double v = 1.0, w = 2.0;
  const Eigen::RowVectorXd z = study.z_atoms.row(7);
  const double theta = study.beta0.dot(z) + study.h0(w) + study.H0(v);
  const auto fam = study.family;
  const double p = fam.eval(theta).F;
  const double a = fam.q(1, theta).q1, b = fam.q(0, theta).q1;
  cstrans::Rng rng(314, 0);
  const int draws = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double q1 = rng.bernoulli(p) ? a : b;
    sum += q1 * q1;
    sumsq += q1 * q1 * q1 * q1;
  }
  const double mean = sum / draws;
  const double se =
      std::sqrt((sumsq / draws - mean * mean) / static_cast<double>(draws));
  CHECK(std::abs(cstrans::q_weight_sq(study, v, w, z) - mean) <= 3.0 * se);
}

TEST_CASE("projections fix constants and measurable functions") {
  const auto spec = cstrans::study_design(41);
  const auto c = cstrans::project_pi1(spec, [](double, double) { return 2.5; });
  for (int i = 0; i < c.size(); ++i)
    CHECK(c[i] == doctest::Approx(2.5).epsilon(1e-13));
  const auto cw = cstrans::project_pi2(spec, [](double, double) { return -1.5; });
  for (int j = 0; j < cw.size(); ++j)
    CHECK(cw[j] == doctest::Approx(-1.5).epsilon(1e-13));

  const auto av =
      cstrans::project_pi1(spec, [](double v, double) { return std::sin(v); });
  for (int i = 0; i < av.size(); ++i)
    CHECK(av[i] == doctest::Approx(std::sin(spec.v.points[i])).epsilon(1e-12));
  const auto bw =
      cstrans::project_pi2(spec, [](double, double w) { return w * w; });
  for (int j = 0; j < bw.size(); ++j)
    CHECK(bw[j] ==
          doctest::Approx(spec.w.points[j] * spec.w.points[j]).epsilon(1e-12));
}

TEST_CASE("projections agree with a direct double sum") {
  const auto spec = cstrans::study_design(31);
  auto g = [](double v, double w) { return v * w; };
  const auto p1 = cstrans::project_pi1(spec, g);
  for (int iv : {0, 7, 15, 30}) {
    const double v = spec.v.points[iv];
    double num = 0.0, den = 0.0;
    for (int j = 0; j < spec.w.points.size(); ++j)
      for (int k = 0; k < spec.z_atoms.rows(); ++k) {
        const double q2 =
            cstrans::q_weight_sq(spec, v, spec.w.points[j], spec.z_atoms.row(k));
        const double mass = spec.w.weights[j] * spec.z_weights[k];
        num += mass * g(v, spec.w.points[j]) * q2;
        den += mass * q2;
      }
    CHECK(p1[iv] == doctest::Approx(num / den).epsilon(1e-8));
  }
}

TEST_CASE("projections are idempotent") {
  const auto spec = cstrans::study_design(41);
  auto g = [](double v, double w) {
    return std::exp(w / 5.0) * (1.0 + 0.3 * std::sin(v));
  };
  const auto p1 = cstrans::project_pi1(spec, g);
  const Eigen::VectorXd points = spec.v.points;
  const auto p11 = cstrans::project_pi1(
      spec, [&](double v, double) { return p1[index_of(points, v)]; });
  CHECK((p11 - p1).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("independent Z with null coefficients kills the smooth correction") {
  const auto spec = binary_z_spec(0.0, -2.0, 1.0);
  const auto hs = cstrans::hstar_series(spec);
  CHECK(hs.terms == 1);
  CHECK(hs.h_tilde.lpNorm<Eigen::Infinity>() < 1e-13);

  // Var(Z) E[Q^2] factorization: Var = (4+1)/2 - 0.25 = 2.25.
  const auto pieces = cstrans::efficient_information(spec, hs);
  double eq2 = 0.0;
  for (int i = 0; i < spec.v.points.size(); ++i)
    for (int j = 0; j < spec.w.points.size(); ++j)
      eq2 += spec.v.weights[i] * spec.w.weights[j] *
             cstrans::q_weight_sq(spec, spec.v.points[i], spec.w.points[j],
                                  spec.z_atoms.row(0));
  CHECK(pieces.I0(0, 0) == doctest::Approx(2.25 * eq2).epsilon(1e-10));
}

TEST_CASE("doubling an independent covariate quadruples its information") {
  const auto base = binary_z_spec(0.0, -1.0, 1.0);
  const auto doubled = binary_z_spec(0.0, -2.0, 2.0);
  const auto i_base =
      cstrans::efficient_information(base, cstrans::hstar_series(base));
  const auto i_doubled =
      cstrans::efficient_information(doubled, cstrans::hstar_series(doubled));
  CHECK(i_doubled.I0(0, 0) ==
        doctest::Approx(4.0 * i_base.I0(0, 0)).epsilon(1e-12));
}

TEST_CASE("one-term truncation matches the explicit leading term") {
  const auto spec = cstrans::study_design(31);
  const auto truncated = cstrans::hstar_series(spec, 1e-8, 1);
  REQUIRE(truncated.terms == 1);

  const Eigen::VectorXd vpts = spec.v.points;
  auto dstar = [&](double v, double w) { return dstar_direct(spec, v, w); };
  const auto pi1_dstar = cstrans::project_pi1(spec, dstar);
  const auto lead = cstrans::project_pi2(spec, [&](double v, double w) {
    return dstar(v, w) - pi1_dstar[index_of(vpts, v)];
  });
  double center = 0.0;
  for (int j = 0; j < spec.w.points.size(); ++j)
    center += spec.w.weights[j] * lead[j];
  for (int j = 0; j < spec.w.points.size(); ++j)
    CHECK(truncated.h_tilde(j, 0) ==
          doctest::Approx(lead[j] - center).epsilon(1e-10));
}

TEST_CASE("series increments decay geometrically") {
  const auto spec = cstrans::study_design(41);
  std::vector<double> increments;
  for (int terms = 2; terms <= 9; ++terms)
    increments.push_back(cstrans::hstar_series(spec, 1e-300, terms).last_increment);
  for (std::size_t i = 3; i < increments.size(); ++i) {
    CHECK(increments[i] < increments[i - 1]);
    CHECK(increments[i] / increments[i - 1] < 0.95);
  }
}

TEST_CASE("smooth correction is stable under grid refinement") {
  const auto coarse = cstrans::study_design(101);
  const auto fine = cstrans::study_design(201);
  const auto h_coarse = cstrans::hstar_series(coarse);
  const auto h_fine = cstrans::hstar_series(fine);
  // Every second fine point coincides with a coarse point.
  double worst = 0.0;
  for (int j = 0; j < coarse.w.points.size(); ++j) {
    REQUIRE(fine.w.points[2 * j] ==
            doctest::Approx(coarse.w.points[j]).epsilon(1e-12));
    for (int r = 0; r < 2; ++r)
      worst = std::max(worst, std::abs(h_coarse.h_tilde(j, r) -
                                       h_fine.h_tilde(2 * j, r)));
  }
  CHECK(worst < 5e-4);

  const auto i_coarse = cstrans::efficient_information(coarse, h_coarse);
  const auto i_fine = cstrans::efficient_information(fine, h_fine);
  CHECK((i_coarse.I0 - i_fine.I0).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("efficient information on the study design") {
  const auto spec = cstrans::study_design(61);
  const auto hs = cstrans::hstar_series(spec, 1e-10);
  const auto pieces = cstrans::efficient_information(spec, hs);

  CHECK((pieces.I0 - pieces.I0.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(pieces.I0);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  // Orthogonality battery: the residual z - h(w) - q(v) is Q^2-orthogonal to
  // polynomial functions of w and of v.
  const Eigen::VectorXd vpts = spec.v.points, wpts = spec.w.points;
  auto battery = [&](auto&& direction) {
    double worst = 0.0;
    for (int deg = 0; deg <= 4; ++deg) {
      for (int r = 0; r < 2; ++r) {
        double acc = 0.0;
        for (int i = 0; i < vpts.size(); ++i)
          for (int j = 0; j < wpts.size(); ++j)
            for (int k = 0; k < spec.z_atoms.rows(); ++k) {
              const double q2 = cstrans::q_weight_sq(spec, vpts[i], wpts[j],
                                                     spec.z_atoms.row(k));
              const double resid = spec.z_atoms(k, r) - hs.h_tilde(j, r) -
                                   pieces.q_tilde(i, r);
              const double mass = spec.v.weights[i] * spec.w.weights[j] *
                                  spec.z_weights[k];
              acc += mass * resid * direction(deg, vpts[i], wpts[j]) * q2;
            }
        worst = std::max(worst, std::abs(acc));
      }
    }
    return worst;
  };
  CHECK(battery([](int deg, double, double w) {
          return std::pow(w / 10.0, deg);
        }) < 1e-6);
  CHECK(battery([](int deg, double v, double) {
          return std::pow(v / 1.8, deg);
        }) < 1e-6);
}

TEST_CASE("degenerate designs raise numerical errors") {
  auto flat = binary_z_spec(0.0, -1.0, 1.0);
  flat.H0 = [](double) { return 800.0; };  // all mass at F = 1: zero weight
  CHECK_THROWS_AS(cstrans::hstar_series(flat), cstrans::NumericalError);

  auto constant_z = binary_z_spec(0.3, 1.0, 1.0);
  const auto hs = cstrans::hstar_series(constant_z);
  CHECK_THROWS_AS(cstrans::efficient_information(constant_z, hs),
                  cstrans::NumericalError);
}
