#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shearband/model.hpp"

namespace shearband {

// Equilibrium record.  M0 and M1 are the two equilibria inside the sector
// P = {p>=0, q>=0, r>0, s>0}; the catalog entries B1..B12 lie outside it,
// some only existing under parameter coincidences recorded in `condition`.
struct Equilibrium {
  Vec4 point = Vec4::Zero();
  std::string label;
  bool in_sector = false;
  std::optional<std::string> condition;        // parametric validity constraint, if any
  std::vector<int> free_components;            // components that may take any value
  std::vector<int> violating_components;       // components placing it outside P
};

inline Vec4 equilibrium_M0(const Params& pr) {
  const SlowCoeffs c = slow_coeffs(pr);
  const double r0 = c.a;
  return Vec4(0.0, 0.0, r0, c.s_nullcline(r0, pr));
}

inline Vec4 equilibrium_M1(const Params& pr) {
  const SlowCoeffs c = slow_coeffs(pr);
  const double r1 = c.a - c.g;  // g = lambda(1+alpha)/(alpha-m-n)
  return Vec4(0.0, 1.0, r1, c.s_nullcline(r1, pr));
}

// Reduced-system (n = 0) equilibria on the critical manifold, in (p,q,s).
inline Vec3 reduced_M0(const Params& pr) {
  const ReducedCoeffs rc = reduced_coeffs(pr);
  return Vec3(0.0, 0.0, rc.sbar);
}

inline Vec3 reduced_M1(const Params& pr) {
  const ReducedCoeffs rc = reduced_coeffs(pr);
  return Vec3(0.0, 1.0, rc.sbar);
}

inline bool in_sector(const Vec4& x) {
  return x[0] >= 0.0 && x[1] >= 0.0 && x[2] > 0.0 && x[3] > 0.0;
}

// Full catalog: M0, M1 plus the twelve sector-exterior equilibria.  Entries
// that exist only at particular parameter values are emitted when the value
// matches within `tol`; free components are set to 1.
inline std::vector<Equilibrium> equilibria(const Params& pr, double tol = 1e-12) {
  const Exponents e = exponents(pr);
  const double al = pr.alpha, m = pr.m, n = pr.n, la = pr.lambda;
  std::vector<Equilibrium> out;

  auto push = [&](const Vec4& x, const std::string& label, std::optional<std::string> cond,
                  std::vector<int> freec, std::vector<int> viol) {
    Equilibrium eq;
    eq.point = x;
    eq.label = label;
    eq.in_sector = in_sector(x);
    eq.condition = std::move(cond);
    eq.free_components = std::move(freec);
    eq.violating_components = std::move(viol);
    out.push_back(std::move(eq));
  };

  push(equilibrium_M0(pr), "M0", std::nullopt, {}, {});
  push(equilibrium_M1(pr), "M1", std::nullopt, {}, {});

  push(Vec4(0, 0, 0, 0), "B1", std::nullopt, {}, {2, 3});

  if (std::abs(la - (-2 * al + 2 * m + n) / (2 * (al - m - n))) <= tol)
    push(Vec4(0, 0, 0, 1), "B2", "lambda = (-2a+2m+n)/(2(a-m-n))", {3}, {2});

  if (std::abs(m + n) > tol) {
    const double r3 = (n * al - e.a * (al - m - n)) / ((1 + al) * (m + n));
    push(Vec4(0, 0, r3, 0), "B3", std::nullopt, {}, {3});
    push(Vec4(0, 1, r3 + la / (m + n), 0), "B6", std::nullopt, {}, {3});
  }

  push(Vec4(0, 1, 0, 0), "B4", std::nullopt, {}, {2, 3});

  if (std::abs(la - (2 * al - 2 * m - n) / (1 + m + n)) <= tol)
    push(Vec4(0, 1, 0, 1), "B5", "lambda = (2a-2m-n)/(1+m+n)", {3}, {2});

  if (std::abs(la - (2 + 2 * al - n) / (2 * (al - m - n))) <= tol)
    push(Vec4(1, 0, 0, 0), "B7", "lambda = (2+2a-n)/(2(a-m-n))", {0}, {2, 3});

  if (std::abs(la - (-2 - 2 * al + n) / (1 + m + n)) <= tol)
    push(Vec4(1, 1, 0, 0), "B8", "lambda = (-2-2a+n)/(1+m+n)", {0}, {2, 3});

  if (std::abs(e.D) <= tol && std::abs(la - (-1 - m) / (1 + m + n)) <= tol) {
    push(Vec4(1, 0, 0, 1), "B9", "D = 0 and lambda = (-1-m)/(1+m+n)", {0, 3}, {2});
    push(Vec4(1, 1, 0, 1), "B10", "D = 0 and lambda = (-1-m)/(1+m+n)", {0, 3}, {2});
  }

  {
    // interior equilibrium off the invariant plane; on the r-nullcline with
    // lambda*p*r + q = kf*(a - r) and r = a0
    const SlowCoeffs c = slow_coeffs(pr);
    const double r11 = e.a0;
    const double s11 = c.s_nullcline(r11, pr);
    const double A11 = 2 * (al - m - n) / e.D;
    const double q11 = e.b * A11 / e.b0;
    const double p11 = (A11 - q11) / (la * r11);
    push(Vec4(p11, q11, r11, s11), "B11", std::nullopt, {}, {0});
  }

  if (std::abs(1 - m - n) > tol) {
    const double u = 2 * al * (1 + m) / (e.D * (1 - m - n));
    const double p12 = (u + 2 * (al - m - n) * la / e.D) * (u - (1 + m + n) * la / e.D) *
                       (1 - m - n) / (la * (2 - n)) * (1 - m - n) / (la * (1 + m));
    const double q12 = (u + 2 * (al - m - n) * la / e.D) * e.b * (1 - m - n) / (la * (1 + m));
    push(Vec4(p12, q12, (2 - n) / (1 - m - n), 0), "B12", std::nullopt, {}, {3});
  }

  return out;
}

}  // namespace shearband
