#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "shearband/errors.hpp"

namespace shearband {

using Field = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
using FieldJac = std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)>;

struct IntegrateOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 1e-4;
  double h_min = 1e-14;
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 5'000'000;
  double stiffness_switch = 5.0;  // engage implicit when max|J_ii|*h exceeds this
  bool allow_implicit = true;
  bool fixed_step = false;  // fixed-h runs, used by the order checks
};

struct Trajectory {
  std::vector<double> eta;
  std::vector<Eigen::VectorXd> x;
  long accepted = 0;
  long rejected = 0;
  long implicit_steps = 0;
};

namespace detail {

struct Dp5Result {
  Eigen::VectorXd y;
  Eigen::VectorXd err;
  Eigen::VectorXd k_last;  // FSAL stage
};

inline Dp5Result dp5_step(const Field& f, double t, const Eigen::VectorXd& y, double h,
                          const Eigen::VectorXd& k1) {
  const Eigen::VectorXd k2 = f(t + h / 5, y + h * (k1 / 5));
  const Eigen::VectorXd k3 = f(t + 3 * h / 10, y + h * (3.0 / 40 * k1 + 9.0 / 40 * k2));
  const Eigen::VectorXd k4 = f(t + 4 * h / 5, y + h * (44.0 / 45 * k1 - 56.0 / 15 * k2 + 32.0 / 9 * k3));
  const Eigen::VectorXd k5 =
      f(t + 8 * h / 9, y + h * (19372.0 / 6561 * k1 - 25360.0 / 2187 * k2 + 64448.0 / 6561 * k3 -
                                212.0 / 729 * k4));
  const Eigen::VectorXd k6 =
      f(t + h, y + h * (9017.0 / 3168 * k1 - 355.0 / 33 * k2 + 46732.0 / 5247 * k3 + 49.0 / 176 * k4 -
                        5103.0 / 18656 * k5));
  Dp5Result r;
  r.y = y + h * (35.0 / 384 * k1 + 500.0 / 1113 * k3 + 125.0 / 192 * k4 - 2187.0 / 6784 * k5 +
                 11.0 / 84 * k6);
  const Eigen::VectorXd k7 = f(t + h, r.y);
  const Eigen::VectorXd y4 =
      y + h * (5179.0 / 57600 * k1 + 7571.0 / 16695 * k3 + 393.0 / 640 * k4 - 92097.0 / 339200 * k5 +
               187.0 / 2100 * k6 + 1.0 / 40 * k7);
  r.err = r.y - y4;
  r.k_last = k7;
  return r;
}

inline double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                         const Eigen::VectorXd& y1, double rtol, double atol) {
  double acc = 0;
  for (int i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sc;
    acc += q * q;
  }
  return std::sqrt(acc / err.size());
}

// One TR-BDF2 step (trapezoidal to gamma*h, then BDF2), L-stable, order 2.
inline Eigen::VectorXd trbdf2_step(const Field& f, const FieldJac& jac, double t,
                                   const Eigen::VectorXd& y, double h) {
  const double g = 2.0 - std::sqrt(2.0);
  auto solve_stage = [&](double coef, double tt, const Eigen::VectorXd& rhs,
                         const Eigen::VectorXd& guess) {
    Eigen::VectorXd u = guess;
    for (int it = 0; it < 25; ++it) {
      const Eigen::VectorXd res = u - coef * f(tt, u) - rhs;
      Eigen::MatrixXd A = Eigen::MatrixXd::Identity(u.size(), u.size()) - coef * jac(tt, u);
      const Eigen::VectorXd du = A.partialPivLu().solve(res);
      u -= du;
      if (du.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + u.lpNorm<Eigen::Infinity>())) return u;
    }
    throw IntegratorError("trbdf2: stage Newton failed");
  };
  const Eigen::VectorXd f0 = f(t, y);
  const Eigen::VectorXd ug =
      solve_stage(g * h / 2, t + g * h, y + g * h / 2 * f0, y + g * h * f0);
  const double c1 = 1.0 / (g * (2.0 - g));
  const double c0 = (1.0 - g) * (1.0 - g) / (g * (2.0 - g));
  const double cf = (1.0 - g) / (2.0 - g);
  return solve_stage(cf * h, t + h, c1 * ug - c0 * y, ug);
}

}  // namespace detail

// Adaptive integration from eta0 to eta1 (either direction).  Steps land
// exactly on eta1.  `observer`, when set, sees every accepted step.
inline Trajectory integrate(const Field& f, const FieldJac& jac, Eigen::VectorXd x0, double eta0,
                            double eta1, const IntegrateOptions& opt = {},
                            const std::function<void(double, const Eigen::VectorXd&)>& observer = {}) {
  Trajectory tr;
  const double dir = (eta1 >= eta0) ? 1.0 : -1.0;
  double t = eta0;
  Eigen::VectorXd y = std::move(x0);
  tr.eta.push_back(t);
  tr.x.push_back(y);
  if (observer) observer(t, y);
  if (eta0 == eta1) return tr;

  double h = dir * std::min(opt.h_init, std::abs(eta1 - eta0));
  double err_prev = 1.0;
  Eigen::VectorXd k1 = f(t, y);
  bool k1_fresh = true;

  const double span_eps = 1e-14 * (std::abs(eta0) + std::abs(eta1) + 1.0);
  for (long step = 0; step < opt.max_steps; ++step) {
    if ((t - eta1) * dir >= -span_eps) {
      tr.eta.back() = eta1;
      return tr;
    }
    double hs = h;  // attempted step; h holds the controller state
    if (std::abs(hs) > std::abs(eta1 - t)) hs = eta1 - t;
    if (!y.allFinite()) throw IntegratorError("integrate: state became non-finite");

    bool implicit = false;
    if (opt.allow_implicit && jac && !opt.fixed_step) {
      const Eigen::MatrixXd J = jac(t, y);
      double diag = 0;
      for (int i = 0; i < y.size(); ++i) diag = std::max(diag, std::abs(J(i, i)));
      implicit = diag * std::abs(hs) > opt.stiffness_switch;
    }

    if (implicit) {
      const Eigen::VectorXd y_full = detail::trbdf2_step(f, jac, t, y, hs);
      const Eigen::VectorXd y_half = detail::trbdf2_step(
          f, jac, t + hs / 2, detail::trbdf2_step(f, jac, t, y, hs / 2), hs / 2);
      const double en =
          detail::error_norm((y_full - y_half) / 3.0, y, y_half, opt.rtol, opt.atol);
      if (en <= 1.0 || std::abs(hs) <= opt.h_min * 2) {
        t += hs;
        y = y_half;
        tr.eta.push_back(t);
        tr.x.push_back(y);
        tr.accepted++;
        tr.implicit_steps++;
        if (observer) observer(t, y);
        k1_fresh = false;
      } else {
        tr.rejected++;
      }
      h = hs * std::clamp(0.9 * std::pow(std::max(en, 1e-10), -1.0 / 3.0), 0.2, 5.0);
    } else {
      if (!k1_fresh) {
        k1 = f(t, y);
        k1_fresh = true;
      }
      const auto r = detail::dp5_step(f, t, y, hs, k1);
      const double en = opt.fixed_step ? 0.0 : detail::error_norm(r.err, y, r.y, opt.rtol, opt.atol);
      if (en <= 1.0 || std::abs(hs) <= opt.h_min * 2) {
        t += hs;
        y = r.y;
        k1 = r.k_last;
        tr.eta.push_back(t);
        tr.x.push_back(y);
        tr.accepted++;
        if (observer) observer(t, y);
        if (opt.fixed_step) {
          h = dir * opt.h_init;
        } else {
          h = hs * std::clamp(0.9 * std::pow(std::max(en, 1e-12), -0.7 / 5.0) *
                                  std::pow(err_prev, 0.4 / 5.0),
                              0.2, 5.0);
          err_prev = std::max(en, 1e-12);
        }
      } else {
        tr.rejected++;
        h = hs * std::clamp(0.9 * std::pow(en, -1.0 / 5.0), 0.1, 1.0);
        err_prev = 1.0;
      }
    }
    if (std::abs(h) < opt.h_min) throw IntegratorError("integrate: step size collapsed");
    if (std::abs(h) > opt.h_max) h = dir * opt.h_max;
  }
  throw IntegratorError("integrate: step budget exhausted");
}

// Integrates across a fixed grid, returning exactly one state per node.
inline std::vector<Eigen::VectorXd> integrate_grid(const Field& f, const FieldJac& jac,
                                                   const Eigen::VectorXd& x0,
                                                   const std::vector<double>& grid,
                                                   const IntegrateOptions& opt = {}) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(grid.size());
  Eigen::VectorXd y = x0;
  out.push_back(y);
  for (size_t i = 1; i < grid.size(); ++i) {
    Trajectory tr = integrate(f, jac, y, grid[i - 1], grid[i], opt);
    y = tr.x.back();
    out.push_back(y);
  }
  return out;
}

}  // namespace shearband
