#include "cstrans/isotonic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cstrans {

namespace {

// Weighted isotonic regression (nondecreasing) by pool-adjacent-violators.
// values/weights are parallel; returns the fitted vector.
std::vector<double> pava(const std::vector<double>& values,
                         const std::vector<double>& weights) {
  // Blocks carry (sum w*y, sum w) rather than their mean, so block means are
  // always a single division of exact sums; with 0/1 unit-weight input the
  // result then agrees bitwise with the min-max formula.
  const std::size_t n = values.size();
  std::vector<double> vsum(n), wsum(n);
  std::vector<std::size_t> count(n);
  std::size_t top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    vsum[top] = weights[i] * values[i];
    wsum[top] = weights[i];
    count[top] = 1;
    while (top > 0 &&
           vsum[top] / wsum[top] < vsum[top - 1] / wsum[top - 1]) {
      vsum[top - 1] += vsum[top];
      wsum[top - 1] += wsum[top];
      count[top - 1] += count[top];
      --top;
    }
    ++top;
  }
  std::vector<double> fit(n);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < top; ++b) {
    const double level = vsum[b] / wsum[b];
    for (std::size_t r = 0; r < count[b]; ++r) fit[pos++] = level;
  }
  for (std::size_t i = 1; i < n; ++i) fit[i] = std::max(fit[i], fit[i - 1]);
  return fit;
}

}  // namespace

StepTransform::StepTransform(std::vector<double> sites,
                             std::vector<double> values)
    : sites_(std::move(sites)), values_(std::move(values)) {
  if (sites_.size() != values_.size())
    throw ConfigError("step transform: sites/values length mismatch");
  for (std::size_t i = 1; i < sites_.size(); ++i) {
    if (!(sites_[i] > sites_[i - 1]))
      throw ConfigError("step transform: sites must be strictly increasing");
    if (values_[i] < values_[i - 1] - 1e-12)
      throw ConfigError("step transform: values must be nondecreasing");
    values_[i] = std::max(values_[i], values_[i - 1]);
  }
  for (double val : values_)
    if (!std::isfinite(val))
      throw ConfigError("step transform: values must be finite");
}

double StepTransform::operator()(double v) const {
  if (sites_.empty()) return 0.0;
  const auto it = std::upper_bound(sites_.begin(), sites_.end(), v);
  if (it == sites_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(it - sites_.begin()) - 1];
}

std::vector<double> gcm_left_derivative(const CusumDiagram& diagram) {
  const std::size_t n = diagram.x.size();
  if (diagram.y.size() != n) throw ConfigError("diagram: x/y length mismatch");
  if (n == 0) return {};
  double prev = 0.0;
  for (double xv : diagram.x) {
    if (!(xv >= prev)) throw ConfigError("diagram: x must be nondecreasing");
    prev = xv;
  }
  if (!(diagram.x[0] >= 0.0)) throw ConfigError("diagram: x must start past the origin");

  // Merge exact x-ties (vertical segments) by accumulating their y increment.
  std::vector<double> dx, ratio, wgt;
  std::vector<std::size_t> group(n);
  double x0 = 0.0, y0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!dx.empty() && diagram.x[i] == x0) {
      // Vertical segment: fold its y increment into the previous one.
      ratio.back() += (diagram.y[i] - y0) / dx.back();
      y0 = diagram.y[i];
      group[i] = dx.size() - 1;
      continue;
    }
    const double step = diagram.x[i] - x0;
    if (!(step > 0.0))
      throw ConfigError("diagram: zero-length segment at the origin");
    dx.push_back(step);
    ratio.push_back((diagram.y[i] - y0) / step);
    wgt.push_back(step);
    group[i] = dx.size() - 1;
    x0 = diagram.x[i];
    y0 = diagram.y[i];
  }

  const std::vector<double> fit = pava(ratio, wgt);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fit[group[i]];
  return out;
}

std::vector<double> npmle_single_sample(const std::vector<int>& delta_sorted) {
  if (delta_sorted.empty()) throw ConfigError("npmle: empty sample");
  std::vector<double> vals(delta_sorted.size()), ones(delta_sorted.size(), 1.0);
  for (std::size_t i = 0; i < delta_sorted.size(); ++i) {
    if (delta_sorted[i] != 0 && delta_sorted[i] != 1)
      throw ConfigError("npmle: delta must be 0 or 1");
    vals[i] = static_cast<double>(delta_sorted[i]);
  }
  std::vector<double> fit = pava(vals, ones);
  for (double& p : fit) p = std::clamp(p, 0.0, 1.0);
  return fit;
}

std::pair<int, int> informative_range(const Eigen::VectorXi& delta) {
  int first_one = -1, last_zero = -1;
  for (int i = 0; i < delta.size(); ++i) {
    if (delta[i] == 1 && first_one < 0) first_one = i;
    if (delta[i] == 0) last_zero = i;
  }
  if (first_one < 0 || last_zero < 0 || first_one > last_zero) return {-1, -1};
  return {first_one, last_zero};
}

namespace {

struct SiteGroups {
  std::vector<double> sites;             // distinct v over the informative range
  std::vector<std::vector<int>> members; // data rows per site
};

SiteGroups group_sites(const Dataset& data, int lo, int hi) {
  SiteGroups g;
  for (int i = lo; i <= hi; ++i) {
    if (g.sites.empty() || data.v[i] > g.sites.back()) {
      g.sites.push_back(data.v[i]);
      g.members.emplace_back();
    }
    g.members.back().push_back(i);
  }
  return g;
}

double block_loglik(const Dataset& data, const Eigen::VectorXd& offsets,
                    const LinkFamily& family, const SiteGroups& g,
                    const std::vector<double>& hvals) {
  double sum = 0.0;
  for (std::size_t s = 0; s < g.sites.size(); ++s)
    for (int i : g.members[s])
      sum += family.q(data.delta[i], offsets[i] + hvals[s]).q;
  return sum / static_cast<double>(data.n());
}

FenchelResiduals residuals_on_groups(const Dataset& data,
                                     const Eigen::VectorXd& offsets,
                                     const LinkFamily& family,
                                     const SiteGroups& g,
                                     const std::vector<double>& hvals) {
  const double n = static_cast<double>(data.n());
  double suffix = 0.0, worst = -std::numeric_limits<double>::infinity();
  double cross = 0.0;
  for (std::size_t s = g.sites.size(); s-- > 0;) {
    double site_sum = 0.0;
    for (int i : g.members[s])
      site_sum += family.q(data.delta[i], offsets[i] + hvals[s]).q1;
    suffix += site_sum / n;
    cross += site_sum * hvals[s] / n;
    // Cuts are only admissible between distinct sites.
    worst = std::max(worst, suffix);
  }
  return {worst, std::abs(cross)};
}

}  // namespace

FenchelResiduals fenchel_residuals(const Dataset& data,
                                   const Eigen::VectorXd& offsets,
                                   const StepTransform& H,
                                   const LinkFamily& family) {
  if (offsets.size() != data.n())
    throw ConfigError("fenchel_residuals: offsets length mismatch");
  const auto [lo, hi] = informative_range(data.delta);
  if (lo < 0)
    throw NumericalError("fenchel_residuals: no informative censoring pattern");
  const SiteGroups g = group_sites(data, lo, hi);
  std::vector<double> hvals(g.sites.size());
  for (std::size_t s = 0; s < g.sites.size(); ++s) hvals[s] = H(g.sites[s]);
  return residuals_on_groups(data, offsets, family, g, hvals);
}

IcmResult icm_h_step(const Dataset& data, const Eigen::VectorXd& offsets,
                     const LinkFamily& family, const StepTransform& init,
                     const IcmOptions& opts) {
  if (offsets.size() != data.n())
    throw ConfigError("icm_h_step: offsets length mismatch");
  const auto [lo, hi] = informative_range(data.delta);
  if (lo < 0)
    throw NumericalError(
        "icm_h_step: censoring pattern pins down no interval of H");
  const SiteGroups g = group_sites(data, lo, hi);
  const std::size_t ns = g.sites.size();
  const double n = static_cast<double>(data.n());

  std::vector<double> hvals(ns);
  for (std::size_t s = 0; s < ns; ++s) hvals[s] = init(g.sites[s]);
  for (std::size_t s = 1; s < ns; ++s) hvals[s] = std::max(hvals[s], hvals[s - 1]);

  IcmResult result;
  double ll = block_loglik(data, offsets, family, g, hvals);

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    result.iterations = iter;

    // Self-induced diagram: slopes of its minorant are the next iterate.
    CusumDiagram diagram;
    diagram.x.reserve(ns);
    diagram.y.reserve(ns);
    double cx = 0.0, cy = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      double score = 0.0, curve = 0.0;
      for (int i : g.members[s]) {
        const QEval qe = family.q(data.delta[i], offsets[i] + hvals[s]);
        if (!(qe.q2 < 0.0))
          throw NumericalError(
              "icm_h_step: non-positive curvature weight at observation " +
              std::to_string(i + 1) + " (condition B5(d) violated here)");
        score += qe.q1;
        curve += -qe.q2;
      }
      cx += curve / n;
      cy += (score + curve * hvals[s]) / n;
      diagram.x.push_back(cx);
      diagram.y.push_back(cy);
    }
    const std::vector<double> cand = gcm_left_derivative(diagram);

    // Damped update: halve toward the current iterate until the
    // log-likelihood does not decrease.
    bool moved = false;
    double lam = 1.0;
    std::vector<double> trial(ns);
    for (int h = 0; h <= opts.max_halvings; ++h, lam *= 0.5) {
      for (std::size_t s = 0; s < ns; ++s)
        trial[s] = hvals[s] + lam * (cand[s] - hvals[s]);
      const double ll_try = block_loglik(data, offsets, family, g, trial);
      if (ll_try >= ll) {
        hvals = trial;
        ll = ll_try;
        moved = true;
        break;
      }
    }

    result.residuals = residuals_on_groups(data, offsets, family, g, hvals);
    if (result.residuals.ineq <= opts.tol && result.residuals.eq <= opts.tol) {
      result.converged = true;
      break;
    }
    if (!moved) break;  // cannot ascend further at floating-point resolution
  }

  for (std::size_t s = 1; s < ns; ++s) hvals[s] = std::max(hvals[s], hvals[s - 1]);
  result.transform = StepTransform(g.sites, hvals);
  result.loglik = ll;
  return result;
}

StepTransform truncate_transform(const StepTransform& H,
                                 const std::vector<int>& delta_sorted) {
  if (H.sites().size() != delta_sorted.size())
    throw ConfigError("truncate_transform: one site per observation required");
  Eigen::VectorXi delta(static_cast<int>(delta_sorted.size()));
  for (int i = 0; i < delta.size(); ++i) delta[i] = delta_sorted[i];
  const auto [lo, hi] = informative_range(delta);
  if (lo < 0) return StepTransform();
  const double floor_val = H.values()[lo], cap_val = H.values()[hi];
  std::vector<double> clamped(H.values());
  for (double& val : clamped) val = std::clamp(val, floor_val, cap_val);
  return StepTransform(H.sites(), clamped);
}

}  // namespace cstrans
