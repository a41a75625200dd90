#pragma once

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <complex>
#include <string>

#include "shearband/equilibria.hpp"
#include "shearband/model.hpp"

namespace shearband {

// Closed-form linear stability data at an equilibrium.  Columns of `vectors`
// are the eigenvectors X_{i1}..X_{i4} in the Appendix normalization; when a
// generalized eigenvector replaces the first column (M1, repeated eigenvalue
// -1 with b != lambda) `generalized` is set and (J - mu I) X_gen = X_12.
struct Spectrum {
  std::array<double, 4> eigenvalues{};
  Mat4 vectors = Mat4::Identity();
  bool generalized = false;
  std::string case_tag;
  Vec4 point = Vec4::Zero();
};

// Roots of mu^2 - tr*mu + det = 0 in the cancellation-safe form; the fast
// root is O(1/n) and the slow one O(1), so the textbook formula loses the
// small root.
inline std::pair<double, double> stable_quadratic_roots(double tr, double det) {
  const double disc = tr * tr - 4.0 * det;
  if (disc < 0.0) throw DegenerateError("stable_quadratic_roots: complex pair");
  const double sq = std::sqrt(disc);
  const double qv = 0.5 * (tr + (tr >= 0.0 ? sq : -sq));
  const double r1 = qv;
  const double r2 = (qv != 0.0) ? det / qv : 0.0;
  return {std::max(r1, r2), std::min(r1, r2)};  // (mu_plus, mu_minus)
}

namespace detail {

// Fast 2x2 block of the linearization at (0, q*, re, se), shared by M0/M1.
struct FastBlock {
  double J33, J34, J43, J44;
  double trace() const { return J33 + J44; }
  double det() const { return J33 * J44 - J34 * J43; }
};

inline FastBlock fast_block(double re, double se, const Params& pr) {
  FastBlock fb;
  fb.J33 = re / pr.n * (1.0 - se - pr.n / re) / pr.lambda;
  fb.J34 = re / pr.n * (pr.alpha * re / pr.lambda);
  fb.J43 = se * (1.0 - se) / pr.lambda;
  fb.J44 = -se * re / pr.lambda;
  return fb;
}

}  // namespace detail

inline Spectrum spectrum_M0(const Params& pr, double degen_tol = 1e-12) {
  if (!(pr.n > 0)) throw DegenerateError("spectrum_M0: requires n > 0");
  const Exponents e = exponents(pr);
  const Vec4 M0 = equilibrium_M0(pr);
  const double r0 = M0[2], s0 = M0[3], la = pr.lambda, al = pr.alpha, n = pr.n;

  const auto fb = detail::fast_block(r0, s0, pr);
  const auto [mu_p, mu_m] = stable_quadratic_roots(fb.trace(), fb.det());

  const double d1 = (1.0 - s0) / la * ((1.0 + al) / la * r0 + 2.0 / s0) -
                    n / r0 * (1.0 / la + 2.0) * (r0 / la + 2.0 / s0);
  const double d2 = (1.0 - s0) / la * ((1.0 + al) / la * r0 + 1.0 / s0) -
                    n / r0 * (1.0 / la + 1.0) * (r0 / la + 1.0 / s0);
  if (std::abs(d1) <= degen_tol || std::abs(d2) <= degen_tol)
    throw DegenerateError("spectrum_M0: Delta1 or Delta2 vanishes");

  const double y1 = -(la + e.b) * r0 * ((1.0 + al) / la * r0 + 2.0 / s0) / d1;
  const double z1 = -(la + e.b) * r0 * (n / r0 * (1.0 / la + 2.0)) / d1;
  const double y2 = -((1.0 + al) / la * r0 + 1.0 / s0) / d2;
  const double z2 = -(n / r0 * (1.0 / la + 1.0)) / d2;
  const double z3 = ((1.0 - s0) / la) / (r0 / la + mu_p / s0);
  const double y4 = (r0 / la + mu_m / s0) / ((1.0 - s0) / la);

  Spectrum sp;
  sp.eigenvalues = {2.0, 1.0, mu_p, mu_m};
  sp.vectors << 1, 0, 0, 0,
      e.b * r0, 1, 0, 0,
      y1, y2, 1, y4,
      z1, z2, z3, 1;
  sp.case_tag = "M0";
  sp.point = M0;
  return sp;
}

inline Spectrum spectrum_M1(const Params& pr, double degen_tol = 1e-12, double case_tol = 1e-9) {
  if (!(pr.n > 0)) throw DegenerateError("spectrum_M1: requires n > 0");
  const Exponents e = exponents(pr);
  const Vec4 M1 = equilibrium_M1(pr);
  const double r1 = M1[2], s1 = M1[3], la = pr.lambda, al = pr.alpha, n = pr.n;

  const double mu11 = -(1.0 + pr.m + n) / (al - pr.m - n);
  const double mu12 = -1.0;
  const auto fb = detail::fast_block(r1, s1, pr);
  const auto [mu_p, mu_m] = stable_quadratic_roots(fb.trace(), fb.det());

  auto delta_at = [&](double mu) {
    return (1.0 - s1) / la * ((1.0 + al) / la * r1 + mu / s1) -
           n / r1 * (1.0 / la + mu) * (r1 / la + mu / s1);
  };

  const bool repeated = std::abs(mu11 + 1.0) <= case_tol;
  const bool case2 = repeated && std::abs(e.b - la) > case_tol;

  const double z3 = ((1.0 - s1) / la) / (r1 / la + mu_p / s1);
  const double y4 = (r1 / la + mu_m / s1) / ((1.0 - s1) / la);

  // X12 (eigenvalue -1)
  double y2, z2;
  if (std::abs(mu_m - mu12) <= case_tol) {
    y2 = -la / (1.0 - s1);
    z2 = 0.0;
  } else {
    const double d4 = delta_at(mu12);
    if (std::abs(d4) <= degen_tol) throw DegenerateError("spectrum_M1: Delta4 vanishes");
    y2 = -((1.0 + al) / la * r1 + mu12 / s1) / d4;
    z2 = -(n / r1 * (1.0 / la + mu12)) / d4;
  }

  Spectrum sp;
  sp.point = M1;
  sp.eigenvalues = {mu11, mu12, mu_p, mu_m};

  double c1col[4];
  if (!case2) {
    const double x1 = repeated ? 0.0 : (e.b - la) * r1 / (1.0 + mu11);
    double y1, z1;
    if (std::abs(mu_m - mu11) <= case_tol) {
      y1 = -(la * r1 + x1) * la / (1.0 - s1);
      z1 = 0.0;
    } else {
      const double d3 = delta_at(mu11);
      if (std::abs(d3) <= degen_tol) throw DegenerateError("spectrum_M1: Delta3 vanishes");
      y1 = -(la * r1 + x1) * ((1.0 + al) / la * r1 + mu11 / s1) / d3;
      z1 = -(la * r1 + x1) * (n / r1 * (1.0 / la + mu11)) / d3;
    }
    c1col[0] = 1.0;
    c1col[1] = x1;
    c1col[2] = y1;
    c1col[3] = z1;
    sp.case_tag = "M1-case1";
  } else {
    // Generalized eigenvector for the double eigenvalue -1:
    // (J + I) X_gen = X_12 with X_gen = (1/((b-lambda) r1), 0, y1g, z1g).
    sp.eigenvalues[0] = -1.0;
    double y1g, z1g;
    if (std::abs(mu_m + 1.0) <= case_tol) {
      y1g = -la / (1.0 - s1) * (la / (e.b - la) - n / r1 * z2);
      z1g = 0.0;
    } else {
      const double mu = -1.0;
      const double d3 = delta_at(mu);
      if (std::abs(d3) <= degen_tol) throw DegenerateError("spectrum_M1: Delta3 vanishes");
      // 2x2 fast-block system A (y,z)^T = rhs, solved by the adjugate; d3 is
      // its determinant up to the shared row scalings.
      const double rhs1 = n / r1 * y2 - la / (e.b - la);
      const double rhs2 = z2 / s1 - la / (e.b - la);
      y1g = ((r1 / la + mu / s1) * rhs1 + (al * r1 / la) * rhs2) / d3;
      z1g = ((1.0 - s1) / la * rhs1 + (-(1.0 - s1) / la + n / r1 * (1.0 / la + mu)) * rhs2) / d3;
    }
    c1col[0] = 1.0 / ((e.b - la) * r1);
    c1col[1] = 0.0;
    c1col[2] = y1g;
    c1col[3] = z1g;
    sp.generalized = true;
    sp.case_tag = "M1-case2";
  }

  sp.vectors << c1col[0], 0, 0, 0,
      c1col[1], 1, 0, 0,
      c1col[2], y2, 1, y4,
      c1col[3], z2, z3, 1;
  return sp;
}

// Independent dense oracle used only for cross-checks.
struct EigenPairs {
  std::array<std::complex<double>, 4> values{};
  Eigen::Matrix4cd vectors;
};

inline EigenPairs numeric_spectrum(const Mat4& J) {
  Eigen::EigenSolver<Mat4> es(J, true);
  if (es.info() != Eigen::Success) throw ConvergenceError("numeric_spectrum: QR iteration failed");
  EigenPairs ep;
  for (int i = 0; i < 4; ++i) ep.values[i] = es.eigenvalues()[i];
  ep.vectors = es.eigenvectors();
  return ep;
}

// Angle between a vector and the numeric eigenvector of the eigenvalue
// closest to `mu`; infinity norm match is left to the caller.
inline double subspace_angle(const Vec4& v, const EigenPairs& ep, double mu) {
  int best = 0;
  double bd = std::abs(ep.values[0] - std::complex<double>(mu, 0));
  for (int i = 1; i < 4; ++i) {
    const double d = std::abs(ep.values[i] - std::complex<double>(mu, 0));
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  Eigen::Vector4cd u = ep.vectors.col(best);
  const std::complex<double> ip = (u.adjoint() * v.cast<std::complex<double>>())(0, 0);
  const double c = std::abs(ip) / (u.norm() * v.norm());
  return std::acos(std::min(1.0, c));
}

}  // namespace shearband
