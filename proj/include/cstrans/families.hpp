#pragma once

#include <string>

#include "cstrans/errors.hpp"

namespace cstrans {

// Floor applied to F and 1-F inside logarithms.
inline constexpr double kLogFloor = 1e-300;
// Cap on |q1| and |q2| so extreme linear predictors stay finite.
inline constexpr double kQDerivCap = 1e12;

enum class LinkKind { ExtremeValue, Logistic, Pareto, Probit, GenNormal, Cauchy };

struct LinkEval {
  double F;     // error distribution function at t
  double f;     // density
  double fdot;  // density derivative
};

// Log-likelihood kernel q(delta, t) = delta log F(t) + (1-delta) log(1-F(t))
// and its first two t-derivatives.
struct QEval {
  double q;
  double q1;
  double q2;
};

// Curvature condition report: the model stays strictly concave in t when
// [f^2 - fdot F] and [f^2 + fdot (1-F)] are positive everywhere, equivalently
// q2 < 0 for delta = 1 and 0. The margins are evaluated in the scaled forms
// f/F - fdot/f and f/(1-F) + fdot/f (the raw quantities divided by the
// positive factors fF resp. f(1-F)), which keep their sign representable in
// the tails where the raw products underflow double precision.
struct B5dReport {
  double min_event;     // min over the grid of f/F - fdot/f
  double min_censored;  // min over the grid of f/(1-F) + fdot/f
  double argmin_event;
  double argmin_censored;
  bool satisfied;
};

class LinkFamily {
 public:
  static LinkFamily extreme_value();
  static LinkFamily logistic();
  static LinkFamily pareto(double gamma);      // gamma > 0
  static LinkFamily probit();
  static LinkFamily gen_normal(double gamma);  // gamma >= 1; curvature needs > 1
  static LinkFamily cauchy();

  // CLI spellings: cloglog | logit | pareto:<gamma> | probit | gnorm:<gamma> | cauchy
  static LinkFamily parse(const std::string& spec);

  LinkKind kind() const { return kind_; }
  double shape() const { return gamma_; }
  const std::string& name() const { return name_; }

  LinkEval eval(double t) const;
  double cdf(double t) const;
  double quantile(double p) const;  // inverse CDF, p in (0, 1)
  QEval q(int delta, double t) const;

  // log F and log(1-F) computed directly on the log scale (may be -inf).
  // Unlike log(cdf(t)), these keep full precision in the tail where the
  // probability rounds to 0 or 1 in double.
  double log_cdf(double t) const;
  double log_sf(double t) const;

  // Tail-stable curvature pieces: the log-density slope fdot/f, the reverse
  // hazard f/F, and the hazard f/(1-F), in forms that stay finite where f, F
  // or 1-F underflow a double.
  double log_density_slope(double t) const;
  double reverse_hazard(double t) const;
  double hazard(double t) const;

  B5dReport check_b5d(double lo = -10.0, double hi = 10.0,
                      double step = 0.01) const;

 private:
  LinkFamily(LinkKind kind, double gamma, std::string name);

  LinkKind kind_;
  double gamma_;
  std::string name_;
  double gnorm_scale_ = 0.0;  // gamma / (2 Gamma(1/gamma)) for gen_normal
};

}  // namespace cstrans
