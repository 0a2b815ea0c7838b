#include "cstrans/splines.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cstrans {

int basis_count(int n, double multiplier) {
  if (n < 1) throw ConfigError("basis_count requires n >= 1");
  if (!(multiplier > 0.0)) throw ConfigError("basis_count multiplier must be positive");
  const double raw = multiplier * std::pow(static_cast<double>(n), 0.2);
  return std::max(4, static_cast<int>(std::ceil(raw)));
}

namespace {

// Type-7 sample quantile (linear interpolation between order statistics).
double quantile_sorted(const std::vector<double>& s, double p) {
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= s.size()) return s.back();
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[lo + 1] - s[lo]);
}

}  // namespace

std::vector<double> select_knots(const std::vector<double>& w, int k_interior,
                                 std::uint64_t /*seed*/) {
  if (k_interior < 1) throw ConfigError("select_knots requires k >= 1");
  if (w.empty()) throw ConfigError("select_knots requires data");
  std::vector<double> s(w);
  std::sort(s.begin(), s.end());
  std::vector<double> uniq(s);
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) < k_interior)
    throw ConfigError("select_knots: fewer distinct values than knots");

  const int k = k_interior;
  std::vector<double> centers(k);
  for (int j = 1; j <= k; ++j)
    centers[j - 1] = quantile_sorted(s, static_cast<double>(j) / (k + 1));
  std::sort(centers.begin(), centers.end());

  // Lloyd iterations; in sorted 1-D data clusters are contiguous runs split at
  // midpoints between adjacent centers.
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<double> next(centers);
    std::size_t start = 0;
    for (int c = 0; c < k; ++c) {
      std::size_t stop = s.size();
      if (c + 1 < k) {
        const double boundary = 0.5 * (centers[c] + centers[c + 1]);
        stop = static_cast<std::size_t>(
            std::lower_bound(s.begin() + static_cast<std::ptrdiff_t>(start),
                             s.end(), boundary) -
            s.begin());
        // Points exactly on the boundary go to the lower cluster.
        while (stop < s.size() && s[stop] == boundary) ++stop;
      }
      if (stop > start) {
        double sum = 0.0;
        for (std::size_t i = start; i < stop; ++i) sum += s[i];
        next[c] = sum / static_cast<double>(stop - start);
      }
      start = stop;
    }
    std::sort(next.begin(), next.end());
    if (next == centers) break;
    centers = std::move(next);
  }

  const double a = s.front(), b = s.back();
  if (!(b > a)) throw ConfigError("select_knots: all values identical");
  const double eps = 1e-6 * (b - a);
  for (double& c : centers) c = std::min(std::max(c, a + eps), b - eps);
  for (int c = 1; c < k; ++c)
    if (!(centers[c] > centers[c - 1]))
      throw ConfigError("select_knots: degenerate knot configuration");
  return centers;
}

SplineBasis::SplineBasis(double a, double b, std::vector<double> interior)
    : a_(a), b_(b) {
  if (!(b > a)) throw ConfigError("spline basis requires b > a");
  for (std::size_t i = 0; i < interior.size(); ++i) {
    if (!(interior[i] > a && interior[i] < b))
      throw ConfigError("interior knots must lie strictly inside (a, b)");
    if (i > 0 && !(interior[i] > interior[i - 1]))
      throw ConfigError("interior knots must be strictly increasing");
  }
  knots_.assign(4, a);
  knots_.insert(knots_.end(), interior.begin(), interior.end());
  knots_.insert(knots_.end(), 4, b);
}

std::vector<double> SplineBasis::interior() const {
  return std::vector<double>(knots_.begin() + 4, knots_.end() - 4);
}

int SplineBasis::find_interval(double w) const {
  const int K = size();
  // Nonempty intervals are [t_i, t_{i+1}) for i in [3, K-1].
  int i = static_cast<int>(std::upper_bound(knots_.begin(), knots_.end(), w) -
                           knots_.begin()) -
          1;
  return std::clamp(i, 3, K - 1);
}

Eigen::VectorXd SplineBasis::eval(double w) const {
  const int K = size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
  w = std::clamp(w, a_, b_);
  const int i = find_interval(w);

  // de Boor triangle: after the loop N[s] = B_{i-3+s}(w), s = 0..3.
  double N[4] = {1.0, 0.0, 0.0, 0.0};
  double left[4], right[4];
  for (int r = 1; r <= 3; ++r) {
    left[r] = w - knots_[i + 1 - r];
    right[r] = knots_[i + r] - w;
    double saved = 0.0;
    for (int s = 0; s < r; ++s) {
      const double temp = N[s] / (right[s + 1] + left[r - s]);
      N[s] = saved + right[s + 1] * temp;
      saved = left[r - s] * temp;
    }
    N[r] = saved;
  }
  for (int s = 0; s < 4; ++s) out[i - 3 + s] = N[s];
  return out;
}

Eigen::VectorXd SplineBasis::eval_d2(double w) const {
  const int K = size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
  w = std::clamp(w, a_, b_);
  const int i = find_interval(w);

  // Order-2 (piecewise linear) basis values at w: B_{i-1,2} and B_{i,2}.
  const auto& t = knots_;
  auto order2 = [&](int j) -> double {
    if (j == i - 1) {
      const double den = t[j + 2] - t[j + 1];
      return den > 0.0 ? (t[j + 2] - w) / den : 0.0;
    }
    if (j == i) {
      const double den = t[j + 1] - t[j];
      return den > 0.0 ? (w - t[j]) / den : 0.0;
    }
    return 0.0;
  };
  auto inv = [](double x) { return x > 0.0 ? 1.0 / x : 0.0; };

  // Twice-differentiated cubic recursion; vanishing-support terms drop out.
  for (int j = i - 3; j <= i; ++j) {
    const double i30 = inv(t[j + 3] - t[j]);
    const double i41 = inv(t[j + 4] - t[j + 1]);
    const double val =
        6.0 * (order2(j) * i30 * inv(t[j + 2] - t[j]) -
               order2(j + 1) * (i30 + i41) * inv(t[j + 3] - t[j + 1]) +
               order2(j + 2) * i41 * inv(t[j + 4] - t[j + 2]));
    out[j] = val;
  }
  return out;
}

Eigen::MatrixXd SplineBasis::penalty() const {
  const int K = size();
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(K, K);
  const double node = 1.0 / std::sqrt(3.0);
  for (std::size_t i = 3; i + 4 < knots_.size(); ++i) {
    const double lo = knots_[i], hi = knots_[i + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (const double x : {mid - half * node, mid + half * node}) {
      const Eigen::VectorXd d2 = eval_d2(x);
      omega.noalias() += half * d2 * d2.transpose();
    }
  }
  // Symmetrize away accumulation noise.
  return 0.5 * (omega + omega.transpose());
}

void SmoothEffect::center_on(const Eigen::VectorXd& w_values) {
  double sum = 0.0;
  for (int i = 0; i < w_values.size(); ++i)
    sum += basis.eval(w_values[i]).dot(coeffs);
  center_offset = sum / static_cast<double>(w_values.size());
}

}  // namespace cstrans
