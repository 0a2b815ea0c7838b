#include "cstrans/families.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace cstrans {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kSqrt2 = 1.4142135623730950488;

double clamp_abs(double x, double cap) {
  if (x > cap) return cap;
  if (x < -cap) return -cap;
  return x;
}

// log(1 - e^a) for a <= 0; the two forms cover the cancellation on each side
// of a = -ln 2.
double log1mexp(double a) {
  if (!(a < 0.0)) return -std::numeric_limits<double>::infinity();
  return a > -0.6931471805599453 ? std::log(-std::expm1(a))
                                 : std::log1p(-std::exp(a));
}

const double kLogFloorLog = std::log(kLogFloor);

std::string shape_text(double g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", g);
  return buf;
}

}  // namespace

LinkFamily::LinkFamily(LinkKind kind, double gamma, std::string name)
    : kind_(kind), gamma_(gamma), name_(std::move(name)) {
  if (kind_ == LinkKind::Pareto && !(gamma_ > 0.0))
    throw ConfigError("pareto link requires gamma > 0");
  if (kind_ == LinkKind::GenNormal) {
    if (!(gamma_ >= 1.0))
      throw ConfigError("gnorm link requires gamma >= 1");
    gnorm_scale_ = gamma_ / (2.0 * std::tgamma(1.0 / gamma_));
  }
}

LinkFamily LinkFamily::extreme_value() {
  return LinkFamily(LinkKind::ExtremeValue, 0.0, "cloglog");
}
LinkFamily LinkFamily::logistic() {
  return LinkFamily(LinkKind::Logistic, 0.0, "logit");
}
LinkFamily LinkFamily::pareto(double gamma) {
  return LinkFamily(LinkKind::Pareto, gamma, "pareto:" + shape_text(gamma));
}
LinkFamily LinkFamily::probit() {
  return LinkFamily(LinkKind::Probit, 0.0, "probit");
}
LinkFamily LinkFamily::gen_normal(double gamma) {
  return LinkFamily(LinkKind::GenNormal, gamma, "gnorm:" + shape_text(gamma));
}
LinkFamily LinkFamily::cauchy() {
  return LinkFamily(LinkKind::Cauchy, 0.0, "cauchy");
}

LinkFamily LinkFamily::parse(const std::string& spec) {
  auto shape_of = [&](const std::string& prefix) {
    const std::string raw = spec.substr(prefix.size());
    try {
      std::size_t used = 0;
      const double g = std::stod(raw, &used);
      if (used != raw.size() || !std::isfinite(g))
        throw ConfigError("bad shape parameter in link spec '" + spec + "'");
      return g;
    } catch (const std::logic_error&) {
      throw ConfigError("bad shape parameter in link spec '" + spec + "'");
    }
  };
  if (spec == "cloglog") return extreme_value();
  if (spec == "logit") return logistic();
  if (spec == "probit") return probit();
  if (spec == "cauchy") return cauchy();
  if (spec.rfind("pareto:", 0) == 0) return pareto(shape_of("pareto:"));
  if (spec.rfind("gnorm:", 0) == 0) return gen_normal(shape_of("gnorm:"));
  throw ConfigError("unknown link '" + spec +
                    "' (expected cloglog|logit|pareto:<g>|probit|gnorm:<g>|cauchy)");
}

LinkEval LinkFamily::eval(double t) const {
  LinkEval e{};
  switch (kind_) {
    case LinkKind::ExtremeValue: {
      // F = 1 - exp(-e^t); the expm1 form keeps the lower tail accurate.
      const double x = std::exp(t);
      e.F = -std::expm1(-x);
      e.f = std::exp(t - x);
      e.fdot = e.f * (1.0 - x);
      break;
    }
    case LinkKind::Logistic: {
      const double F = 1.0 / (1.0 + std::exp(-t));
      e.F = F;
      e.f = F * (1.0 - F);
      e.fdot = e.f * (1.0 - 2.0 * F);
      break;
    }
    case LinkKind::Pareto: {
      // F = 1 - (1 + g e^t)^(-1/g)
      const double x = std::exp(t);
      const double l1 = std::log1p(gamma_ * x);
      e.F = -std::expm1(-l1 / gamma_);
      e.f = std::exp(t - (1.0 / gamma_ + 1.0) * l1);
      // (1+g)x/(1+gx) written to stay finite as x -> inf
      e.fdot = e.f * (1.0 - (1.0 + gamma_) / (1.0 / x + gamma_));
      break;
    }
    case LinkKind::Probit: {
      e.F = 0.5 * std::erfc(-t / kSqrt2);
      e.f = kInvSqrt2Pi * std::exp(-0.5 * t * t);
      e.fdot = -t * e.f;
      break;
    }
    case LinkKind::GenNormal: {
      e.F = cdf(t);
      const double a = std::pow(std::abs(t), gamma_);
      e.f = gnorm_scale_ * std::exp(-a);
      if (t == 0.0) {
        e.fdot = 0.0;  // gamma > 1 makes |t|^(gamma-1) vanish at 0
      } else {
        const double sign = t > 0.0 ? 1.0 : -1.0;
        e.fdot = -sign * gamma_ * gnorm_scale_ *
                 std::pow(std::abs(t), gamma_ - 1.0) * std::exp(-a);
      }
      break;
    }
    case LinkKind::Cauchy: {
      const double d = 1.0 + t * t;
      e.F = 0.5 + std::atan(t) / M_PI;
      e.f = 1.0 / (M_PI * d);
      e.fdot = -2.0 * t / (M_PI * d * d);
      break;
    }
  }
  // Once the density underflows, its derivative has too; scrub inf*0 noise.
  if (e.f == 0.0) e.fdot = 0.0;
  return e;
}

double LinkFamily::cdf(double t) const {
  if (kind_ == LinkKind::GenNormal) {
    // Exact tail identity: F(t) = Q(1/g, |t|^g)/2 for t <= 0, mirrored above,
    // with Q the regularized upper incomplete gamma function.
    if (t == 0.0) return 0.5;
    const double tail =
        0.5 * boost::math::gamma_q(1.0 / gamma_, std::pow(std::abs(t), gamma_));
    return t < 0.0 ? tail : 1.0 - tail;
  }
  return eval(t).F;
}

double LinkFamily::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("quantile requires p in (0,1)");
  switch (kind_) {
    case LinkKind::ExtremeValue:
      return std::log(-std::log1p(-p));
    case LinkKind::Logistic:
      return std::log(p / (1.0 - p));
    case LinkKind::Pareto:
      // (1-p)^(-g) = 1 + g e^t
      return std::log(std::expm1(-gamma_ * std::log1p(-p)) / gamma_);
    case LinkKind::Probit:
      return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
    case LinkKind::GenNormal: {
      if (p == 0.5) return 0.0;
      const double tail = p < 0.5 ? 2.0 * p : 2.0 * (1.0 - p);
      const double x = boost::math::gamma_q_inv(1.0 / gamma_, tail);
      const double t = std::pow(x, 1.0 / gamma_);
      return p < 0.5 ? -t : t;
    }
    case LinkKind::Cauchy:
      return std::tan(M_PI * (p - 0.5));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double LinkFamily::log_cdf(double t) const {
  switch (kind_) {
    case LinkKind::ExtremeValue:
    case LinkKind::Pareto:
      return log1mexp(log_sf(t));
    case LinkKind::Logistic:
      return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
    case LinkKind::Probit:
      // erfc is cancellation-free and stays accurate down to its underflow,
      // which lies beyond the kLogFloor cutoff.
      return std::log(0.5 * std::erfc(-t / kSqrt2));
    case LinkKind::GenNormal: {
      if (t == 0.0) return std::log(0.5);
      const double tail = 0.5 * boost::math::gamma_q(
                                    1.0 / gamma_, std::pow(std::abs(t), gamma_));
      return t < 0.0 ? std::log(tail) : std::log1p(-tail);
    }
    case LinkKind::Cauchy:
      // pi/2 + atan(t) = atan(-1/t) for t < 0 sidesteps the cancellation.
      return t >= 0.0 ? std::log(0.5 + std::atan(t) / M_PI)
                      : std::log(std::atan(-1.0 / t) / M_PI);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double LinkFamily::log_sf(double t) const {
  switch (kind_) {
    case LinkKind::ExtremeValue:
      return -std::exp(t);
    case LinkKind::Pareto: {
      // -(1/g) log(1 + g e^t); the split keeps e^t from overflowing.
      const double l1 =
          t > 500.0 ? t + std::log(gamma_) + std::log1p(std::exp(-t) / gamma_)
                    : std::log1p(gamma_ * std::exp(t));
      return -l1 / gamma_;
    }
    case LinkKind::Logistic:
    case LinkKind::Probit:
    case LinkKind::GenNormal:
    case LinkKind::Cauchy:
      return log_cdf(-t);  // symmetric error density
  }
  return std::numeric_limits<double>::quiet_NaN();
}

QEval LinkFamily::q(int delta, double t) const {
  if (delta != 0 && delta != 1)
    throw ConfigError("q kernel requires delta in {0,1}");
  QEval out{};
  // Values come from the log-scale CDF forms, so the floor engages only when
  // the probability genuinely drops below kLogFloor, not when 1-F rounds off.
  // Derivatives via the hazard forms: q1(1) = f/F, q2(1) = (f/F)(fdot/f - f/F)
  // and the mirror image for delta = 0. The ratios stay finite deep in either
  // tail where f, F, or 1-F underflow, so the caps engage with the right sign
  // instead of the raw quotients degenerating to 0/0.
  const double slope = log_density_slope(t);
  if (delta == 1) {
    out.q = std::max(log_cdf(t), kLogFloorLog);
    const double rh = reverse_hazard(t);
    out.q1 = std::min(rh, kQDerivCap);
    out.q2 = clamp_abs(rh * (slope - rh), kQDerivCap);
  } else {
    out.q = std::max(log_sf(t), kLogFloorLog);
    if (kind_ == LinkKind::ExtremeValue) {
      // q(0, t) = -e^t exactly: both derivatives equal -e^t, and the generic
      // slope + hazard composition would cancel at 1 against e^t.
      const double x = std::min(std::exp(t), kQDerivCap);
      out.q1 = -x;
      out.q2 = -x;
    } else {
      const double hz = hazard(t);
      out.q1 = -std::min(hz, kQDerivCap);
      out.q2 = clamp_abs(-hz * (slope + hz), kQDerivCap);
    }
  }
  return out;
}

double LinkFamily::log_density_slope(double t) const {
  switch (kind_) {
    case LinkKind::ExtremeValue:
      return 1.0 - std::exp(t);
    case LinkKind::Logistic:
      return -std::tanh(0.5 * t);
    case LinkKind::Pareto: {
      // (1 - e^t) / (1 + g e^t), each branch free of inf/inf
      if (t <= 0.0) {
        const double x = std::exp(t);
        return (1.0 - x) / (1.0 + gamma_ * x);
      }
      const double ix = std::exp(-t);
      return (ix - 1.0) / (ix + gamma_);
    }
    case LinkKind::Probit:
      return -t;
    case LinkKind::GenNormal:
      if (t == 0.0) return 0.0;
      return -std::copysign(gamma_ * std::pow(std::abs(t), gamma_ - 1.0), t);
    case LinkKind::Cauchy:
      return -2.0 * t / (1.0 + t * t);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double LinkFamily::hazard(double t) const {
  switch (kind_) {
    case LinkKind::ExtremeValue:
      return std::exp(t);
    case LinkKind::Logistic:
      return 1.0 / (1.0 + std::exp(-t));  // = F
    case LinkKind::Pareto:
      return 1.0 / (std::exp(-t) + gamma_);  // = e^t / (1 + g e^t)
    case LinkKind::Probit: {
      // erfc keeps 1-F cancellation-free on both sides; the asymptote is
      // needed only once the complement itself leaves the normal range,
      // which can happen solely for t >> 1.
      const double s = 0.5 * std::erfc(t / kSqrt2);
      if (s >= 1e-280)
        return kInvSqrt2Pi * std::exp(-0.5 * t * t) / s;
      return t + 1.0 / t;  // Mills-ratio asymptote
    }
    case LinkKind::GenNormal: {
      const double a = 1.0 / gamma_;
      const double x = std::pow(std::abs(t), gamma_);
      const double f = gnorm_scale_ * std::exp(-x);
      if (t <= 0.0) return f / (1.0 - 0.5 * boost::math::gamma_q(a, x));
      const double s = 0.5 * boost::math::gamma_q(a, x);
      if (s >= 1e-280 && f > 0.0) return f / s;
      // Deep right tail: Gamma(a,x) ~ x^(a-1) e^(-x) (1 + (a-1)/x + ...),
      // so f/(1-F) ~ g x^(1-a) / CF with the series truncated where it is
      // far below double precision (x is huge whenever this branch runs).
      double cf = 1.0, term = 1.0;
      for (int k = 1; k <= 8; ++k) {
        term *= (a - k) / x;
        cf += term;
      }
      return gamma_ * std::pow(x, 1.0 - a) / cf;
    }
    case LinkKind::Cauchy: {
      const double s = 0.5 - std::atan(t) / M_PI;
      if (s > 0.0) return 1.0 / (M_PI * (1.0 + t * t) * s);
      return 1.0 / t;  // atan rounding at astronomically large t
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double LinkFamily::reverse_hazard(double t) const {
  switch (kind_) {
    case LinkKind::ExtremeValue: {
      // f/F = e^t / (e^(e^t) - 1)
      const double x = std::exp(t);
      if (x == 0.0) return 1.0;  // lower-tail limit
      const double den = std::expm1(x);
      return std::isinf(den) ? 0.0 : x / den;
    }
    case LinkKind::Logistic:
      return 1.0 / (1.0 + std::exp(t));  // = 1 - F
    case LinkKind::Pareto: {
      const double l1 = std::log1p(gamma_ * std::exp(t));
      const double F = -std::expm1(-l1 / gamma_);
      const double f = std::exp(t - (1.0 / gamma_ + 1.0) * l1);
      if (F > 0.0) return f / F;
      return 1.0;  // lower-tail limit (F ~ f ~ e^t)
    }
    // Symmetric densities: f(-t) = f(t) and F(t) = 1 - F(-t).
    case LinkKind::Probit:
    case LinkKind::GenNormal:
    case LinkKind::Cauchy:
      return hazard(-t);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

B5dReport LinkFamily::check_b5d(double lo, double hi, double step) const {
  if (!(step > 0.0) || !(hi > lo))
    throw ConfigError("check_b5d requires hi > lo and step > 0");
  B5dReport rep{};
  rep.min_event = std::numeric_limits<double>::infinity();
  rep.min_censored = std::numeric_limits<double>::infinity();
  const long nsteps = std::lround((hi - lo) / step);
  for (long i = 0; i <= nsteps; ++i) {
    const double t = i == nsteps ? hi : lo + static_cast<double>(i) * step;
    const double slope = log_density_slope(t);
    const double ev = reverse_hazard(t) - slope;
    const double ce = hazard(t) + slope;
    if (ev < rep.min_event) {
      rep.min_event = ev;
      rep.argmin_event = t;
    }
    if (ce < rep.min_censored) {
      rep.min_censored = ce;
      rep.argmin_censored = t;
    }
  }
  rep.satisfied = rep.min_event > 0.0 && rep.min_censored > 0.0;
  return rep;
}

}  // namespace cstrans
