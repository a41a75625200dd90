#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "shearband/integrate.hpp"
#include "shearband/model.hpp"
#include "shearband/orbit.hpp"
#include "shearband/spectrum.hpp"

namespace shearband {

// Closed-form alpha = 0, p = 0 solution of the (q, r) subsystem for
// n = 1/k: q is the logistic and r a rational function of e^eta.  Evaluation
// is split at eta = 0 so that (1+e^eta)^k never overflows for k ~ 100.
class ExactSeed {
 public:
  ExactSeed(const Params& pr, int k, double degen_tol = 1e-12) : pr_(pr), k_(k) {
    if (pr.alpha != 0.0) throw DegenerateError("ExactSeed: requires alpha = 0");
    if (k < 1) throw DegenerateError("ExactSeed: k must be a positive integer");
    const Exponents e = exponents(pr);
    r0_ = e.a;
    W0_ = -(pr.m + pr.n) * r0_ / pr.lambda;
    const double kw = k_ * W0_;
    coef_.resize(k + 1);
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      if (std::abs(kw - j) <= degen_tol)
        throw DegenerateError("ExactSeed: k*W0 collides with integer j");
      coef_[j] = kw / (kw - j) * binom;
      binom *= double(k - j) / double(j + 1);
    }
  }

  double q(double eta) const { return 1.0 / (1.0 + std::exp(-eta)); }
  double dq(double eta) const {
    const double qq = q(eta);
    return qq * (1.0 - qq);
  }

  double r(double eta) const {
    double lr, ratio;
    eval(eta, lr, ratio);
    return std::exp(lr);
  }

  // d(log r)/d(eta) = k q(eta) - sum_j j c_j E^j / sum_j c_j E^j
  double dlogr(double eta) const {
    double lr, ratio;
    eval(eta, lr, ratio);
    return k_ * q(eta) - ratio;
  }

  double dr(double eta) const { return r(eta) * dlogr(eta); }

  double r0() const { return r0_; }
  double W0() const { return W0_; }
  int k() const { return k_; }

 private:
  void eval(double eta, double& log_r, double& dratio) const {
    double S0 = 0, S1 = 0;
    if (eta <= 0) {
      const double E = std::exp(eta);
      double Ej = 1.0;
      for (int j = 0; j <= k_; ++j) {
        S0 += coef_[j] * Ej;
        S1 += j * coef_[j] * Ej;
        Ej *= E;
      }
      log_r = std::log(r0_) + k_ * std::log1p(E) - std::log(S0);
    } else {
      const double F = std::exp(-eta);
      double Fi = 1.0;
      for (int i = 0; i <= k_; ++i) {
        const int j = k_ - i;
        S0 += coef_[j] * Fi;
        S1 += j * coef_[j] * Fi;
        Fi *= F;
      }
      log_r = std::log(r0_) + k_ * std::log1p(F) - std::log(S0);
    }
    dratio = S1 / S0;
  }

  Params pr_;
  int k_;
  double r0_, W0_;
  std::vector<double> coef_;
};

inline Vec3 exact_seed(double eta, int k, const Params& pr) {
  ExactSeed es(pr, k);
  return Vec3(0.0, es.q(eta), es.r(eta));
}

// r for alpha = 0, p = 0 when n is not a reciprocal integer: integrate the
// decoupled r equation with the exact logistic q.  The r direction is
// strongly unstable forward in eta, so the bounded connecting solution is
// recovered by integrating backward from r(eta_end), where it contracts.
inline std::vector<double> seed_r_numeric(const Params& pr, const std::vector<double>& grid,
                                          double r_end, double shift = 0.0, double tol = 1e-12) {
  const Exponents e = exponents(pr);
  const double la = pr.lambda, mm = pr.m, nn = pr.n;
  Field f = [&](double eta, const Eigen::VectorXd& x) {
    const double qv = 1.0 / (1.0 + std::exp(-(eta - shift)));
    Eigen::VectorXd d(1);
    d[0] = x[0] / nn * ((-mm - nn) / la * (x[0] - e.a) + qv);
    return d;
  };
  FieldJac J = [&](double eta, const Eigen::VectorXd& x) {
    const double qv = 1.0 / (1.0 + std::exp(-(eta - shift)));
    Eigen::MatrixXd j(1, 1);
    j(0, 0) = ((-mm - nn) / la * (2.0 * x[0] - e.a) + qv) / nn;
    return j;
  };
  IntegrateOptions opt;
  opt.rtol = tol;
  opt.atol = tol;
  std::vector<double> rev(grid.rbegin(), grid.rend());
  Eigen::VectorXd x0(1);
  x0[0] = r_end;
  auto states = integrate_grid(f, J, x0, rev, opt);
  std::vector<double> out(states.size());
  for (size_t i = 0; i < states.size(); ++i) out[states.size() - 1 - i] = states[i][0];
  return out;
}

// Integrates the non-autonomous s equation along given q(eta), r(eta)
// samples (alpha = 0 throughout).
inline std::vector<double> integrate_s_along_seed(
    const Params& pr, const std::vector<double>& grid,
    const std::function<double(double)>& q_of, const std::function<double(double)>& r_of,
    double s_start, double tol = 1e-12) {
  const Exponents e = exponents(pr);
  const double la = pr.lambda, mm = pr.m, nn = pr.n;
  Field f = [&](double eta, const Eigen::VectorXd& x) {
    const double qv = q_of(eta), rv = r_of(eta);
    Eigen::VectorXd d(1);
    d[0] = x[0] * ((-mm - nn) / la * (rv - e.a) + qv - rv / la * (x[0] - (1.0 + mm + nn)) - nn / la);
    return d;
  };
  FieldJac J = [&](double eta, const Eigen::VectorXd& x) {
    const double qv = q_of(eta), rv = r_of(eta);
    Eigen::MatrixXd j(1, 1);
    j(0, 0) = (-mm - nn) / la * (rv - e.a) + qv - rv / la * (2.0 * x[0] - (1.0 + mm + nn)) - nn / la;
    return j;
  };
  IntegrateOptions opt;
  opt.rtol = tol;
  opt.atol = tol;
  Eigen::VectorXd x0(1);
  x0[0] = s_start;
  auto states = integrate_grid(f, J, x0, grid, opt);
  std::vector<double> out(states.size());
  for (size_t i = 0; i < states.size(); ++i) out[i] = states[i][0];
  return out;
}

struct SeedOptions {
  double eta_max = 10.0;
  double shift = -2.0;   // centers the transition at eta = shift
  int nodes = 601;
  double ode_tol = 1e-12;
};

// Steps 1-2: manufactures the alpha = 0, p = 0 starting orbit on a uniform
// mesh, with boundary metadata extracted against the M0 spectrum.  The seed
// params must have alpha = 0; n = 1/k uses the closed form, anything else
// falls back on the numerical r.
inline Orbit build_seed_orbit(const Params& pr, const SeedOptions& so = {}) {
  if (pr.alpha != 0.0) throw DegenerateError("build_seed_orbit: requires alpha = 0");
  Orbit orb;
  orb.params = pr;
  orb.eta.resize(so.nodes);
  const double h = 2.0 * so.eta_max / (so.nodes - 1);
  for (int i = 0; i < so.nodes; ++i) orb.eta[i] = -so.eta_max + i * h;

  const Spectrum sp0 = spectrum_M0(pr);
  const Vec4 M0 = sp0.point;
  const Vec4 X02 = sp0.vectors.col(1);

  const int k = int(std::lround(1.0 / pr.n));
  const bool closed_form = std::abs(1.0 / pr.n - k) < 1e-9 && k >= 1;

  std::vector<double> qs(so.nodes), rs(so.nodes);
  std::function<double(double)> q_of, r_of;
  std::optional<ExactSeed> es;
  if (closed_form) {
    es.emplace(pr, k);
    for (int i = 0; i < so.nodes; ++i) {
      qs[i] = es->q(orb.eta[i] - so.shift);
      rs[i] = es->r(orb.eta[i] - so.shift);
    }
    q_of = [&, sh = so.shift](double eta) { return es->q(eta - sh); };
    r_of = [&, sh = so.shift](double eta) { return es->r(eta - sh); };
  } else {
    for (int i = 0; i < so.nodes; ++i) qs[i] = 1.0 / (1.0 + std::exp(-(orb.eta[i] - so.shift)));
    rs = seed_r_numeric(pr, orb.eta, equilibrium_M1(pr)[2], so.shift, so.ode_tol);
    q_of = [sh = so.shift](double eta) { return 1.0 / (1.0 + std::exp(-(eta - sh))); };
    r_of = {};
  }

  const double eps0_raw = qs.front();
  const double s_start = M0[3] + eps0_raw * X02[3];
  std::vector<double> ss;
  if (r_of) {
    ss = integrate_s_along_seed(pr, orb.eta, q_of, r_of, s_start, so.ode_tol);
  } else {
    // interpolate numerical r linearly between mesh nodes
    auto r_interp = [&](double eta) {
      const double pos = (eta + so.eta_max) / h;
      const int i = std::clamp(int(pos), 0, so.nodes - 2);
      const double w = pos - i;
      return (1.0 - w) * rs[i] + w * rs[i + 1];
    };
    ss = integrate_s_along_seed(pr, orb.eta, q_of, r_interp, s_start, so.ode_tol);
  }

  orb.states.resize(so.nodes);
  for (int i = 0; i < so.nodes; ++i) orb.states[i] = Vec4(0.0, qs[i], rs[i], ss[i]);

  orb.boundary.eta_max = so.eta_max;
  orb.boundary.eps0 = eps0_raw * X02.norm();
  orb.boundary.nu0 = X02.normalized();
  return orb;
}

struct SlowTrajectory {
  std::vector<double> eta;
  std::vector<Vec4> states;
  std::optional<double> sector_exit;  // first eta at which the orbit left P
};

// General-purpose trajectory integration of the slow system (n > 0, stiff
// form) or of the reduced flow on the critical manifold (n = 0); the
// implicit scheme engages automatically through IntegrateOptions.
inline SlowTrajectory integrate_slow(const Vec4& state0, double eta0, double eta1,
                                     const Params& pr, double tol = 1e-10) {
  SlowTrajectory out;
  IntegrateOptions opt;
  opt.rtol = tol;
  opt.atol = tol * 1e-2;
  auto watch = [&](double eta, const Eigen::VectorXd& x, double rv) {
    if (!out.sector_exit && (x[0] < -1e-12 || x[1] < -1e-12 || rv <= 0.0 || x[x.size() - 1] <= 0.0))
      out.sector_exit = eta;
  };
  if (pr.n > 0) {
    Field f = [&](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return slow_field(Vec4(x), pr);
    };
    FieldJac J = [&](double, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
      return slow_jacobian(Vec4(x), pr);
    };
    integrate(f, J, state0, eta0, eta1, opt, [&](double eta, const Eigen::VectorXd& x) {
      out.eta.push_back(eta);
      out.states.emplace_back(x);
      watch(eta, x, x[2]);
    });
  } else {
    Field f = [&](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return reduced_field(Vec3(x), pr);
    };
    Eigen::VectorXd x0(3);
    x0 << state0[0], state0[1], state0[3];
    integrate(f, {}, x0, eta0, eta1, opt, [&](double eta, const Eigen::VectorXd& x) {
      const double rh = r_hat(x[0], x[1], x[2], pr);
      out.eta.push_back(eta);
      out.states.emplace_back(Vec4(x[0], x[1], rh, x[2]));
      watch(eta, x, rh);
    });
  }
  return out;
}

}  // namespace shearband
