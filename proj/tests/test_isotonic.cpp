#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "cstrans/data.hpp"
#include "cstrans/errors.hpp"
#include "cstrans/families.hpp"
#include "cstrans/isotonic.hpp"
#include "oracles.hpp"

using cstrans::CusumDiagram;
using cstrans::Dataset;
using cstrans::LinkFamily;
using cstrans::StepTransform;

namespace {

// Small dataset at distinct sites with an informative censoring pattern.
Dataset small_dataset(std::mt19937_64& eng, int n) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd v(n), w(n);
  Eigen::VectorXi delta(n);
  Eigen::MatrixXd z(n, 1);
  while (true) {
    for (int i = 0; i < n; ++i) {
      v[i] = i + unif(eng);  // distinct and increasing
      delta[i] = unif(eng) < 0.5 ? 1 : 0;
      z(i, 0) = 0.0;
      w[i] = 0.0;
    }
    const auto range = cstrans::informative_range(delta);
    if (range.first >= 0) break;
  }
  return Dataset::from_columns(v, delta, z, w);
}

}  // namespace

TEST_CASE("step transform semantics") {
  const StepTransform H({1.0, 3.0}, {5.0, 7.0});
  CHECK(H(0.5) == 5.0);
  CHECK(H(1.0) == 5.0);  // right-continuous
  CHECK(H(2.9) == 5.0);
  CHECK(H(3.0) == 7.0);
  CHECK(H(10.0) == 7.0);
  CHECK(StepTransform()(4.2) == 0.0);

  CHECK_THROWS_AS(StepTransform({1.0, 1.0}, {0.0, 1.0}), cstrans::ConfigError);
  CHECK_THROWS_AS(StepTransform({1.0, 2.0}, {1.0, 0.0}), cstrans::ConfigError);
  CHECK_THROWS_AS(StepTransform({1.0}, {0.0, 1.0}), cstrans::ConfigError);
}

TEST_CASE("minorant slopes: worked example") {
  const CusumDiagram diagram{{1.0, 2.0, 3.0}, {1.0, 1.0, 3.0}};
  const auto slopes = cstrans::gcm_left_derivative(diagram);
  REQUIRE(slopes.size() == 3);
  CHECK(slopes[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(slopes[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(slopes[2] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("minorant slopes match exhaustive isotonic regression") {
  std::mt19937_64 eng(41);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 8);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = size(eng);
    CusumDiagram d;
    double x = 0.0, y = 0.0;
    std::vector<double> ratio(n), weight(n);
    for (int i = 0; i < n; ++i) {
      const double dx = 0.1 + unif(eng);
      const double dy = 2.0 * unif(eng) - 1.0;
      ratio[i] = dy / dx;
      weight[i] = dx;
      x += dx;
      y += dy;
      d.x.push_back(x);
      d.y.push_back(y);
    }
    const auto fit = cstrans::gcm_left_derivative(d);
    const auto oracle = oracles::isotonic_ls_oracle(ratio, weight);
    double obj_fit = 0.0, obj_oracle = 0.0;
    for (int i = 0; i < n; ++i) {
      obj_fit += weight[i] * (ratio[i] - fit[i]) * (ratio[i] - fit[i]);
      obj_oracle += weight[i] * (ratio[i] - oracle[i]) * (ratio[i] - oracle[i]);
      CHECK(fit[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
      if (i) CHECK(fit[i] >= fit[i - 1]);
    }
    CHECK(std::abs(obj_fit - obj_oracle) <= 1e-9);
  }
}

TEST_CASE("diagram ties and validation") {
  // A vertical segment folds into the preceding one.
  const CusumDiagram tied{{1.0, 1.0, 2.0}, {0.25, 0.5, 1.5}};
  const auto slopes = cstrans::gcm_left_derivative(tied);
  REQUIRE(slopes.size() == 3);
  CHECK(slopes[0] == slopes[1]);
  CHECK_THROWS_AS(cstrans::gcm_left_derivative({{2.0, 1.0}, {0.0, 0.0}}),
                  cstrans::ConfigError);
}

TEST_CASE("one-sample estimator: worked example") {
  const auto fit = cstrans::npmle_single_sample({1, 0, 0, 1, 1});
  REQUIRE(fit.size() == 5);
  CHECK(fit[0] == 1.0 / 3.0);
  CHECK(fit[1] == 1.0 / 3.0);
  CHECK(fit[2] == 1.0 / 3.0);
  CHECK(fit[3] == 1.0);
  CHECK(fit[4] == 1.0);
}

TEST_CASE("one-sample estimator equals the min-max formula bit for bit") {
  std::mt19937_64 eng(43);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = size(eng);
    std::vector<int> delta(n);
    for (auto& d : delta) d = unif(eng) < 0.5 ? 1 : 0;
    const auto fit = cstrans::npmle_single_sample(delta);
    const auto oracle = oracles::minmax_npmle_oracle(delta);
    for (int i = 0; i < n; ++i) CHECK(fit[i] == oracle[i]);
  }
  CHECK_THROWS_AS(cstrans::npmle_single_sample({1, 2}), cstrans::ConfigError);
  CHECK_THROWS_AS(cstrans::npmle_single_sample({}), cstrans::ConfigError);
}

TEST_CASE("informative range") {
  auto range = [](std::initializer_list<int> d) {
    Eigen::VectorXi delta(static_cast<int>(d.size()));
    int i = 0;
    for (int x : d) delta[i++] = x;
    return cstrans::informative_range(delta);
  };
  CHECK(range({0, 1, 0, 1}) == std::pair<int, int>{1, 2});
  CHECK(range({1, 0}) == std::pair<int, int>{0, 1});
  CHECK(range({1, 1, 0, 0, 1}) == std::pair<int, int>{0, 3});
  CHECK(range({0, 0, 0}) == std::pair<int, int>{-1, -1});
  CHECK(range({1, 1}) == std::pair<int, int>{-1, -1});
  CHECK(range({0, 0, 1, 1}) == std::pair<int, int>{-1, -1});
}

TEST_CASE("truncation clamps to the informative values") {
  const StepTransform H({1.0, 2.0, 3.0, 4.0}, {10.0, 20.0, 30.0, 40.0});
  const auto T = cstrans::truncate_transform(H, {0, 1, 0, 1});
  CHECK(T.values() == std::vector<double>{20.0, 20.0, 30.0, 30.0});
  CHECK(T.sites() == H.sites());

  // Already-sorted censoring pattern pins nothing down: zero transform.
  CHECK(cstrans::truncate_transform(H, {0, 0, 1, 1}).empty());
  CHECK_THROWS_AS(cstrans::truncate_transform(H, {0, 1}), cstrans::ConfigError);
}

TEST_CASE("profile step maximizer agrees with partition enumeration") {
  std::mt19937_64 eng(47);
  std::uniform_int_distribution<int> size(4, 8);
  std::normal_distribution<double> gauss(0.0, 0.8);
  const std::vector<LinkFamily> fams = {LinkFamily::logistic(),
                                        LinkFamily::extreme_value()};
  cstrans::IcmOptions opts;
  opts.tol = 1e-9;
  opts.max_iter = 5000;
  for (int rep = 0; rep < 60; ++rep) {
    const int n = size(eng);
    const Dataset data = small_dataset(eng, n);
    Eigen::VectorXd offsets(n);
    for (int i = 0; i < n; ++i) offsets[i] = gauss(eng);
    const auto& fam = fams[rep % fams.size()];

    const auto res = cstrans::icm_h_step(data, offsets, fam, StepTransform(), opts);
    REQUIRE(res.converged);

    const auto [lo, hi] = cstrans::informative_range(data.delta);
    std::vector<int> delta(n);
    std::vector<double> off(n);
    for (int i = 0; i < n; ++i) {
      delta[i] = data.delta[i];
      off[i] = offsets[i];
    }
    const auto oracle = oracles::monotone_fit_oracle(delta, off, fam, lo, hi);

    CHECK(res.loglik <= oracle.objective + 1e-9);
    CHECK(res.loglik == doctest::Approx(oracle.objective).epsilon(1e-6));
    REQUIRE(res.transform.values().size() == oracle.values.size());
    for (std::size_t s = 0; s < oracle.values.size(); ++s)
      CHECK(std::abs(res.transform.values()[s] - oracle.values[s]) < 2e-3);
    for (std::size_t s = 1; s < oracle.values.size(); ++s)
      CHECK(res.transform.values()[s] >= res.transform.values()[s - 1]);
  }
}

TEST_CASE("optimality gap is small at the solution and large off it") {
  std::mt19937_64 eng(53);
  const Dataset data = small_dataset(eng, 8);
  Eigen::VectorXd offsets = Eigen::VectorXd::Zero(8);
  const auto fam = LinkFamily::logistic();
  const auto res = cstrans::icm_h_step(data, offsets, fam, StepTransform());
  REQUIRE(res.converged);
  CHECK(res.residuals.ineq <= 1e-6);
  CHECK(res.residuals.eq <= 1e-6);

  const auto direct =
      cstrans::fenchel_residuals(data, offsets, res.transform, fam);
  CHECK(direct.ineq <= 1e-6);
  CHECK(direct.eq <= 1e-6);

  std::vector<double> bumped(res.transform.values());
  for (auto& h : bumped) h += 0.4;  // shift breaks the equality condition
  const auto off_opt = cstrans::fenchel_residuals(
      data, offsets, StepTransform(res.transform.sites(), bumped), fam);
  CHECK((off_opt.ineq > 1e-6 || off_opt.eq > 1e-6));
}

TEST_CASE("curvature violation raises a numerical error") {
  // Cauchy event-side curvature turns positive near t = -5.
  Eigen::VectorXd v(2), w(2);
  v << 1.0, 2.0;
  w << 0.0, 0.0;
  Eigen::VectorXi delta(2);
  delta << 1, 0;
  Eigen::MatrixXd z(2, 1);
  z << 0.0, 0.0;
  const Dataset data = Dataset::from_columns(v, delta, z, w);
  Eigen::VectorXd offsets(2);
  offsets << -5.0, -5.0;
  CHECK_THROWS_AS(cstrans::icm_h_step(data, offsets, LinkFamily::cauchy(),
                                      StepTransform()),
                  cstrans::NumericalError);
}

TEST_CASE("uninformative pattern raises a numerical error") {
  Eigen::VectorXd v(3), w(3);
  v << 1.0, 2.0, 3.0;
  w << 0.0, 0.0, 0.0;
  Eigen::VectorXi delta(3);
  delta << 0, 0, 1;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 1);
  const Dataset data = Dataset::from_columns(v, delta, z, w);
  const Eigen::VectorXd offsets = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(cstrans::icm_h_step(data, offsets, LinkFamily::logistic(),
                                      StepTransform()),
                  cstrans::NumericalError);
}
