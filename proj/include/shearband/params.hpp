#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "shearband/errors.hpp"

namespace shearband {

// Material/rate parameters of the power-law model.  alpha measures thermal
// softening, m strain hardening, n strain-rate sensitivity and lambda the
// localization rate.  A raw Params carries no validity promise; use
// validate_params for user-facing entry points.  The seed machinery runs
// with alpha = 0, which is deliberately outside the validated range.
struct Params {
  double alpha = 0;
  double m = 0;
  double n = 0;
  double lambda = 0;
};

inline double lambda_max(double alpha, double m, double n) {
  const double s = 1.0 + m + n;
  return 2.0 * (alpha - m - n) * (1.0 + m) / (s * s);
}

inline double lambda_max(const Params& p) { return lambda_max(p.alpha, p.m, p.n); }

// Similarity exponents and their lambda-split components:
// a = a0 + a1*lambda etc., D = 1 + 2*alpha - m - n.
struct Exponents {
  double a0, a1, b0, b1, c0, c1, d0, d1;
  double a, b, c, d;
  double D;
};

inline Exponents exponents(const Params& p) {
  Exponents e{};
  e.D = 1.0 + 2.0 * p.alpha - p.m - p.n;
  e.a0 = (2.0 + 2.0 * p.alpha - p.n) / e.D;
  e.a1 = 2.0 * (1.0 + p.alpha) / e.D;
  e.b0 = (1.0 + p.m) / e.D;
  e.b1 = (1.0 + p.m + p.n) / e.D;
  e.c0 = 2.0 * (1.0 + p.m) / e.D;
  e.c1 = 2.0 * (1.0 + p.m + p.n) / e.D;
  e.d0 = (-2.0 * p.alpha + 2.0 * p.m + p.n) / e.D;
  e.d1 = 2.0 * (-p.alpha + p.m + p.n) / e.D;
  e.a = e.a0 + e.a1 * p.lambda;
  e.b = e.b0 + e.b1 * p.lambda;
  e.c = e.c0 + e.c1 * p.lambda;
  e.d = e.d0 + e.d1 * p.lambda;
  return e;
}

struct ParamSet {
  Params p;
  Exponents exp;
  double L_p = 0;  // -alpha + m + n; negative in the unstable regime
};

// Checks the admissible parameter range and the rate bound
// 0 < lambda < lambda_max.  n = 0 is accepted for reduced-system use only.
inline ParamSet validate_params(double alpha, double m, double n, double lambda) {
  auto fail = [](const std::string& msg) -> ParamSet { throw RangeError(msg); };
  std::ostringstream os;
  if (!(alpha > 0)) {
    os << "alpha = " << alpha << " violates alpha > 0";
    return fail(os.str());
  }
  if (!(m > -1.0)) {
    os << "m = " << m << " violates m > -1";
    return fail(os.str());
  }
  if (!(n >= 0.0)) {
    os << "n = " << n << " violates n >= 0";
    return fail(os.str());
  }
  const double lp = -alpha + m + n;
  if (!(lp < 0.0)) {
    os << "-alpha+m+n = " << lp << " violates -alpha+m+n < 0";
    return fail(os.str());
  }
  const double lmax = lambda_max(alpha, m, n);
  if (!(lambda > 0.0 && lambda < lmax)) {
    os << "lambda = " << lambda << " outside (0, " << lmax << ")";
    return fail(os.str());
  }
  ParamSet ps;
  ps.p = Params{alpha, m, n, lambda};
  ps.exp = exponents(ps.p);
  ps.L_p = lp;
  return ps;
}

inline ParamSet validate_params(const Params& p) {
  return validate_params(p.alpha, p.m, p.n, p.lambda);
}

// Recovers lambda from the data ratio U0/Gamma0 = a(lambda).  The open
// admissibility interval for the ratio corresponds to 0 < lambda < lambda_max.
inline double lambda_from_data(double U0, double Gamma0, double alpha, double m, double n) {
  if (!(U0 > 0 && Gamma0 > 0)) throw RangeError("lambda_from_data: U0, Gamma0 must be positive");
  const double D = 1.0 + 2.0 * alpha - m - n;
  const double ratio = U0 / Gamma0;
  const double lo = (2.0 + 2.0 * alpha - n) / D;
  const double hi = lo + 2.0 * (1.0 + alpha) / D * lambda_max(alpha, m, n);
  if (!(ratio > lo && ratio < hi)) {
    std::ostringstream os;
    os << "U0/Gamma0 = " << ratio << " outside admissible interval (" << lo << ", " << hi << ")";
    throw RangeError(os.str());
  }
  return (ratio - lo) * D / (2.0 * (1.0 + alpha));
}

}  // namespace shearband
