#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "shearband/params.hpp"

namespace shearband {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// State ordering is always (p, q, r, s); eta = log(xi) is the independent
// variable.  The r-equation is stored divided by n, so slow_field returns
// the stiff form d(p,q,r,s)/d(eta) directly.
struct SlowState {
  Vec4 x = Vec4::Zero();
  double eta = 0;
};

// Shared coefficients of the slow system; equilibria.hpp builds M0/M1 from
// the same expressions so that slow_field cancels exactly there instead of
// through rounding (the r equation carries a 1/n amplification).
struct SlowCoeffs {
  double a, b, sbar, kf, g;  // kf = (alpha-m-n)/(lambda(1+alpha)), g = 1/kf
  double s_nullcline(double r, const Params& pr) const {
    return sbar - pr.n / ((1.0 + pr.alpha) * r);
  }
};

inline SlowCoeffs slow_coeffs(const Params& pr) {
  const Exponents e = exponents(pr);
  SlowCoeffs c;
  c.a = e.a;
  c.b = e.b;
  c.sbar = (1.0 + pr.m + pr.n) / (1.0 + pr.alpha);
  c.kf = (pr.alpha - pr.m - pr.n) / (pr.lambda * (1.0 + pr.alpha));
  c.g = 1.0 / c.kf;
  return c;
}

inline Vec4 slow_field(const Vec4& x, const Params& pr) {
  if (pr.n == 0.0) throw DegenerateError("slow_field: n = 0, use reduced_field/layer_field");
  const SlowCoeffs c = slow_coeffs(pr);
  const double p = x[0], q = x[1], r = x[2], s = x[3];
  const double la = pr.lambda, al = pr.alpha;
  const double A = c.kf * (r - (c.a - q * c.g)) + la * p * r;
  Vec4 f;
  f[0] = p * ((r - c.a) / la + 2.0 - la * p * r - q);
  f[1] = q * (1.0 - la * p * r - q) + c.b * p * r;
  if (r == 0.0) {
    f[2] = 0.0;
    f[3] = s * (A - pr.n / (la * (1.0 + al)));
  } else {
    const double w = s - c.s_nullcline(r, pr);
    f[2] = r / pr.n * (A + (al / la) * r * w);
    f[3] = s * (A - (r / la) * w);
  }
  return f;
}

inline Mat4 slow_jacobian(const Vec4& x, const Params& pr) {
  if (pr.n == 0.0) throw DegenerateError("slow_jacobian: n = 0");
  const Exponents e = exponents(pr);
  const double p = x[0], q = x[1], r = x[2], s = x[3];
  const double la = pr.lambda, al = pr.alpha, n = pr.n;
  const double sbar = (1.0 + pr.m + n) / (1.0 + al);
  const double kf = (al - pr.m - n) / (la * (1.0 + al));
  const double A = kf * (r - e.a) + la * p * r + q;
  const double B = A + (al / la) * r * (s - sbar) + n * al / (la * (1.0 + al));
  const double C = A - (r / la) * (s - sbar) - n / (la * (1.0 + al));
  Mat4 J;
  J(0, 0) = (r - e.a) / la + 2.0 - 2.0 * la * p * r - q;
  J(0, 1) = -p;
  J(0, 2) = p * (1.0 / la - la * p);
  J(0, 3) = 0.0;
  J(1, 0) = -la * q * r + e.b * r;
  J(1, 1) = 1.0 - la * p * r - 2.0 * q;
  J(1, 2) = -la * p * q + e.b * p;
  J(1, 3) = 0.0;
  J(2, 0) = r / n * (la * r);
  J(2, 1) = r / n;
  J(2, 2) = (B + r * (kf + la * p + (al / la) * (s - sbar))) / n;
  J(2, 3) = al * r * r / (n * la);
  J(3, 0) = s * la * r;
  J(3, 1) = s;
  J(3, 2) = s * (kf + la * p - (s - sbar) / la);
  J(3, 3) = C - s * r / la;
  return J;
}

// Coefficients of the reduced (n -> 0) problem.  The original n is kept in
// the ParamSet; everything here is evaluated in the strict n = 0 limit.
struct ReducedCoeffs {
  double a, a0, b, D, sbar, kf;  // kf = (alpha-m)/(lambda(1+alpha))
};

inline ReducedCoeffs reduced_coeffs(const Params& pr) {
  Params p0 = pr;
  p0.n = 0.0;
  const Exponents e = exponents(p0);
  ReducedCoeffs rc;
  rc.a = e.a;
  rc.a0 = e.a0;
  rc.b = e.b;
  rc.D = e.D;
  rc.sbar = (1.0 + pr.m) / (1.0 + pr.alpha);
  rc.kf = (pr.alpha - pr.m) / (pr.lambda * (1.0 + pr.alpha));
  return rc;
}

inline double r_hat_denominator(double p, double s, const Params& pr) {
  const ReducedCoeffs rc = reduced_coeffs(pr);
  return rc.kf + pr.lambda * p + (pr.alpha / pr.lambda) * (s - rc.sbar);
}

// Graph r = r_hat(p,q,s) of the layer-problem zero set, away from r = 0.
inline double r_hat(double p, double q, double s, const Params& pr, double floor = 1e-10) {
  const ReducedCoeffs rc = reduced_coeffs(pr);
  const double den = rc.kf + pr.lambda * p + (pr.alpha / pr.lambda) * (s - rc.sbar);
  if (std::abs(den) < floor) throw SingularGraphError("r_hat: graph denominator below floor");
  return (rc.kf * rc.a - q) / den;
}

// Restricted reduced flow on the critical manifold, in (p, q, s).
inline Vec3 reduced_field(double p, double q, double s, const Params& pr, double floor = 1e-10) {
  const ReducedCoeffs rc = reduced_coeffs(pr);
  const double rh = r_hat(p, q, s, pr, floor);
  const double la = pr.lambda, al = pr.alpha;
  Vec3 f;
  f[0] = p * (rc.D / (la * (1.0 + al)) * (rh - rc.a0) + (al / la) * rh * (s - rc.sbar));
  f[1] = q * (1.0 - la * p * rh - q) + rc.b * p * rh;
  f[2] = -(1.0 + al) / la * rh * s * (s - rc.sbar);
  return f;
}

inline Vec3 reduced_field(const Vec3& x, const Params& pr, double floor = 1e-10) {
  return reduced_field(x[0], x[1], x[2], pr, floor);
}

// Layer problem: r' = g(p,q,r,s) in the fast time eta/n, n = 0 coefficients.
inline double layer_field(const Vec4& x, const Params& pr) {
  const ReducedCoeffs rc = reduced_coeffs(pr);
  const double p = x[0], q = x[1], r = x[2], s = x[3];
  return r * (rc.kf * (r - rc.a) + pr.lambda * p * r + q + (pr.alpha / pr.lambda) * r * (s - rc.sbar));
}

inline double layer_dg_dr(const Vec4& x, const Params& pr) {
  const ReducedCoeffs rc = reduced_coeffs(pr);
  const double p = x[0], q = x[1], r = x[2], s = x[3];
  const double inner = rc.kf * (r - rc.a) + pr.lambda * p * r + q + (pr.alpha / pr.lambda) * r * (s - rc.sbar);
  return inner + r * (rc.kf + pr.lambda * p + (pr.alpha / pr.lambda) * (s - rc.sbar));
}

}  // namespace shearband
