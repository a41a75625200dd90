#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sampling.hpp"
#include "shearband/equilibria.hpp"
#include "shearband/model.hpp"

using namespace shearband;
using shearband::testing::sample_params;

namespace {

Mat4 fd_jacobian(const Vec4& x, const Params& pr, double h = 1e-6) {
  Mat4 J;
  for (int j = 0; j < 4; ++j) {
    Vec4 xp = x, xm = x;
    const double hj = h * (1.0 + std::abs(x[j]));
    xp[j] += hj;
    xm[j] -= hj;
    J.col(j) = (slow_field(xp, pr) - slow_field(xm, pr)) / (2.0 * hj);
  }
  return J;
}

}  // namespace

TEST_CASE("slow_field vanishes at M0 and M1") {
  std::mt19937_64 rng(0xB001);
  for (int i = 0; i < 200; ++i) {
    const Params p = sample_params(rng);
    CHECK(slow_field(equilibrium_M0(p), p).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(slow_field(equilibrium_M1(p), p).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("slow_field rejects n = 0") {
  REQUIRE_THROWS_AS(slow_field(Vec4(0, 0, 1, 1), Params{1.0, 0.0, 0.0, 1.0}), DegenerateError);
}

TEST_CASE("the hyperplane p = 0 is invariant") {
  std::mt19937_64 rng(0xB002);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 100; ++i) {
    const Params p = sample_params(rng);
    const Vec4 x(0.0, u(rng), u(rng), u(rng));
    CHECK(slow_field(x, p)[0] == 0.0);
  }
}

TEST_CASE("p = 0 fixes the q equation to the logistic") {
  std::mt19937_64 rng(0xB003);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 50; ++i) {
    const Params p = sample_params(rng);
    const double q = u(rng);
    const Vec4 x(0.0, q, u(rng), u(rng));
    const Vec4 f = slow_field(x, p);
    CHECK(f[1] == Catch::Approx(q * (1.0 - q)).margin(1e-14));
  }
}

TEST_CASE("slow_jacobian agrees with central finite differences") {
  std::mt19937_64 rng(0xB004);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int i = 0; i < 100; ++i) {
    const Params p = sample_params(rng);
    const Vec4 x(u(rng), u(rng), u(rng), u(rng));
    const Mat4 J = slow_jacobian(x, p);
    const Mat4 Jfd = fd_jacobian(x, p);
    const double scale = J.cwiseAbs().maxCoeff();
    CHECK((J - Jfd).cwiseAbs().maxCoeff() <= 1e-6 * scale);
  }
}

TEST_CASE("slow_jacobian at M0 matches the closed-form linearization") {
  const Params p{1.2, 0.1, 0.02, 0.5 * lambda_max(1.2, 0.1, 0.02)};
  const Exponents e = exponents(p);
  const Vec4 M0 = equilibrium_M0(p);
  const double r0 = M0[2], s0 = M0[3];
  const Mat4 J = slow_jacobian(M0, p);

  Mat4 ref;
  ref << 2, 0, 0, 0,
      e.b * r0, 1, 0, 0,
      r0 / p.n * p.lambda * r0, r0 / p.n,
      r0 / p.n * (1.0 - s0 - p.n / r0) / p.lambda, r0 / p.n * p.alpha * r0 / p.lambda,
      s0 * p.lambda * r0, s0, s0 * (1.0 - s0) / p.lambda, -s0 * r0 / p.lambda;
  CHECK((J - ref).cwiseAbs().maxCoeff() <= 1e-9 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("slow_jacobian at M1 matches the closed-form linearization") {
  const Params p{1.2, 0.1, 0.02, 0.5 * lambda_max(1.2, 0.1, 0.02)};
  const Exponents e = exponents(p);
  const Vec4 M1 = equilibrium_M1(p);
  const double r1 = M1[2], s1 = M1[3];
  const Mat4 J = slow_jacobian(M1, p);

  Mat4 ref;
  ref << -(1.0 + p.m + p.n) / (p.alpha - p.m - p.n), 0, 0, 0,
      (e.b - p.lambda) * r1, -1, 0, 0,
      r1 / p.n * p.lambda * r1, r1 / p.n,
      r1 / p.n * (1.0 - s1 - p.n / r1) / p.lambda, r1 / p.n * p.alpha * r1 / p.lambda,
      s1 * p.lambda * r1, s1, s1 * (1.0 - s1) / p.lambda, -s1 * r1 / p.lambda;
  CHECK((J - ref).cwiseAbs().maxCoeff() <= 1e-9 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("r_hat satisfies the implicit graph relation") {
  std::mt19937_64 rng(0xB005);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Params p = sample_params(rng);
    const ReducedCoeffs rc = reduced_coeffs(p);
    const double pp = 2.0 * u(rng);
    const double qq = 2.0 * u(rng);
    const double ss = rc.sbar * (0.8 + 0.4 * u(rng));
    double rh;
    try {
      rh = r_hat(pp, qq, ss, p);
    } catch (const SingularGraphError&) {
      continue;
    }
    const double resid =
        rc.kf * (rh - rc.a) + p.lambda * pp * rh + qq + (p.alpha / p.lambda) * rh * (ss - rc.sbar);
    CHECK(std::abs(resid) <= 1e-14 * (1.0 + std::abs(rc.kf * rc.a) + qq));
  }
}

TEST_CASE("r_hat level set passes through both equilibria") {
  const Params p{1.1, 0.2, 0.0, 0.4 * lambda_max(1.1, 0.2, 0.0)};
  const ReducedCoeffs rc = reduced_coeffs(p);
  CHECK(r_hat(0.0, 0.0, rc.sbar, p) == Catch::Approx(rc.a).epsilon(1e-13));
  const double r1_red = rc.a - p.lambda * (1.0 + p.alpha) / (p.alpha - p.m);
  CHECK(r_hat(0.0, 1.0, rc.sbar, p) == Catch::Approx(r1_red).epsilon(1e-13));
}

TEST_CASE("r_hat throws on a singular graph denominator") {
  const Params p{1.0, 0.0, 0.0, 1.0};
  const ReducedCoeffs rc = reduced_coeffs(p);
  // choose s so the denominator vanishes
  const double s_bad = rc.sbar - rc.kf * p.lambda / p.alpha;
  REQUIRE_THROWS_AS(r_hat(0.0, 0.5, s_bad, p), SingularGraphError);
}

TEST_CASE("reduced_field fixes M0 and the invariant plane") {
  const Params p{1.3, 0.15, 0.0, 0.3 * lambda_max(1.3, 0.15, 0.0)};
  const ReducedCoeffs rc = reduced_coeffs(p);
  CHECK(reduced_field(0.0, 0.0, rc.sbar, p).lpNorm<Eigen::Infinity>() <= 1e-13);
  // s-component vanishes identically on s = (1+m)/(1+alpha)
  std::mt19937_64 rng(0xB006);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  for (int i = 0; i < 50; ++i) {
    const Vec3 f = reduced_field(u(rng), u(rng), rc.sbar, p);
    CHECK(f[2] == 0.0);
  }
}

TEST_CASE("reduced q equation on the invariant plane with p = 0 is logistic") {
  const Params p{0.9, -0.1, 0.0, 0.45 * lambda_max(0.9, -0.1, 0.0)};
  const ReducedCoeffs rc = reduced_coeffs(p);
  for (double q : {0.1, 0.4, 0.9, 1.5}) {
    const Vec3 f = reduced_field(0.0, q, rc.sbar, p);
    CHECK(f[1] == Catch::Approx(q * (1.0 - q)).margin(1e-14));
  }
}

TEST_CASE("layer_field vanishes on r = 0 and on the graph") {
  std::mt19937_64 rng(0xB007);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Params p = sample_params(rng);
    const ReducedCoeffs rc = reduced_coeffs(p);
    const double pp = u(rng), qq = u(rng);
    const double ss = rc.sbar * (0.9 + 0.2 * u(rng));
    CHECK(layer_field(Vec4(pp, qq, 0.0, ss), p) == 0.0);
    double rh;
    try {
      rh = r_hat(pp, qq, ss, p);
    } catch (const SingularGraphError&) {
      continue;
    }
    CHECK(std::abs(layer_field(Vec4(pp, qq, rh, ss), p)) <= 1e-12 * (1.0 + rh * rh));
  }
}

TEST_CASE("layer partial jacobian is positive on the critical manifold") {
  // dg/dr >= 1/2 min{1,r1} ((alpha-m)/(2 lambda(1+alpha)) - lambda*eps) on K
  std::mt19937_64 rng(0xB008);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Params p = sample_params(rng);
    const ReducedCoeffs rc = reduced_coeffs(p);
    const double r1_red = rc.a - p.lambda * (1.0 + p.alpha) / (p.alpha - p.m);
    if (!(r1_red > 0)) continue;
    const double rbar = 0.5 * std::min(1.0, r1_red);
    const double eps = 0.5 * (p.alpha - p.m) / (4.0 * p.lambda * p.lambda * (1.0 + p.alpha));
    const double bound = rbar * (rc.kf / 2.0 - p.lambda * eps);
    const double smax = 0.5 * std::min((p.alpha - p.m) / (p.alpha * (1.0 + p.alpha)),
                                       (1.0 + p.m) / (1.0 + p.alpha));
    for (int i = 0; i < 50; ++i) {
      const double pp = -eps + (2.0 + eps) * u(rng);
      const double qq = -2.0 + 4.0 * u(rng);
      const double ss = rc.sbar + smax * (2.0 * u(rng) - 1.0);
      double rh;
      try {
        rh = r_hat(pp, qq, ss, p);
      } catch (const SingularGraphError&) {
        continue;
      }
      if (rh < rbar) continue;  // outside the trapezoid domain
      CHECK(layer_dg_dr(Vec4(pp, qq, rh, ss), p) >= bound - 1e-12);
    }
  }
}

TEST_CASE("equilibria catalog: sector membership and residuals") {
  std::mt19937_64 rng(0xB009);
  for (int i = 0; i < 50; ++i) {
    const Params p = sample_params(rng);
    const auto eqs = equilibria(p);
    REQUIRE(eqs.size() >= 2);
    int sector_count = 0;
    for (const auto& eq : eqs) {
      if (eq.in_sector) sector_count++;
      if (eq.label == "M0" || eq.label == "M1") {
        CHECK(eq.in_sector);
        CHECK(slow_field(eq.point, p).lpNorm<Eigen::Infinity>() <= 1e-11);
      } else {
        CHECK_FALSE(eq.in_sector);
        CHECK_FALSE(eq.violating_components.empty());
        if (eq.free_components.empty())
          CHECK(slow_field(eq.point, p).lpNorm<Eigen::Infinity>() <=
                1e-10 * (1.0 + eq.point.cwiseAbs().maxCoeff()));
      }
    }
    CHECK(sector_count == 2);
  }
}

TEST_CASE("equilibria: r0*s0 = c identity and M1 sector condition") {
  std::mt19937_64 rng(0xB00A);
  for (int i = 0; i < 200; ++i) {
    const Params p = sample_params(rng);
    const Exponents e = exponents(p);
    const Vec4 M0 = equilibrium_M0(p);
    CHECK(std::abs(M0[2] * M0[3] - e.c) <= 1e-13 * (1.0 + std::abs(e.c)));
    // s1 > 0 iff lambda < lambda_max
    const Vec4 M1 = equilibrium_M1(p);
    CHECK(M1[3] > 0.0);
    Params bad = p;
    bad.lambda = lambda_max(p) * 1.05;
    const Vec4 M1bad = equilibrium_M1(bad);
    CHECK_FALSE((M1bad[3] > 0.0 && M1bad[2] > 0.0));
  }
}

TEST_CASE("equilibria at alpha=1, m=n=0, lambda=1") {
  const Params p{1.0, 0.0, 0.0, 1.0};
  const Vec4 M0 = equilibrium_M0(p);
  const Vec4 M1 = equilibrium_M1(p);
  CHECK(M0[2] == Catch::Approx(8.0 / 3.0));
  CHECK(M0[3] == Catch::Approx(0.5));
  CHECK(M1[2] == Catch::Approx(2.0 / 3.0));
  CHECK(M1[3] == Catch::Approx(0.5));
}
