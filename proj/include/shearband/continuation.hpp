#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "shearband/collocation.hpp"
#include "shearband/orbit.hpp"
#include "shearband/seed.hpp"
#include "shearband/spectrum.hpp"

namespace shearband {

// Projection boundary machinery at a fixed parameter point: the orbit is
// anchored at M0 + eps0*nu0 and its endpoint defect against M1 must lie in
// the stable subspace span{X11, X12, X14}.  ell_raw is the third row of
// S1^{-1} (the left eigenvector of mu13), so ell_raw . X13 = 1; ell_unit is
// rescaled to make a unit perturbation along X13/|X13| read as a unit defect.
struct HetBc {
  Vec4 M0, M1;
  Mat4 S0, S1;
  Vec4 X13;
  Vec4 ell_raw, ell_unit;

  static HetBc make(const Params& pr) {
    HetBc bc;
    const Spectrum s0 = spectrum_M0(pr);
    const Spectrum s1 = spectrum_M1(pr);
    bc.M0 = s0.point;
    bc.M1 = s1.point;
    bc.S0 = s0.vectors;
    bc.S1 = s1.vectors;
    bc.X13 = s1.vectors.col(2);
    bc.ell_raw = bc.S1.inverse().row(2);
    bc.ell_unit = bc.ell_raw * bc.X13.norm();
    return bc;
  }

  double unstable_defect(const Vec4& end_state) const { return ell_unit.dot(end_state - M1); }

  // stable-subspace part of the end deviation and its polar factorization
  void end_data(const Vec4& end_state, double& eps1, Vec4& nu1) const {
    const Vec4 Y = end_state - M1;
    const Vec4 Ys = Y - ell_raw.dot(Y) * X13;
    eps1 = Ys.norm();
    nu1 = eps1 > 0 ? Vec4(Ys / eps1) : Vec4::Zero();
  }
};

// Full defect vector of the projection boundary-value problem: start anchor
// (4), unstable end component (1), stable end amplitude vs eps1 (1) and the
// nu0 normalization (1).
inline Eigen::VectorXd boundary_defect(const Orbit& orbit, const Params& pr,
                                       const BoundaryData& bd) {
  const HetBc bc = HetBc::make(pr);
  Eigen::VectorXd g(7);
  g.head<4>() = orbit.front_state() - (bc.M0 + bd.eps0 * bd.nu0);
  g[4] = bc.unstable_defect(orbit.back_state());
  double eps1;
  Vec4 nu1;
  bc.end_data(orbit.back_state(), eps1, nu1);
  g[5] = eps1 - bd.eps1;
  g[6] = bd.nu0.norm() - 1.0;
  return g;
}

struct BranchPoint {
  Params params;
  int stage = 0;      // 3 = parameter continuation, 4 = direction continuation
  double theta = 0;   // path coordinate of the stage
  double eps0 = 0;
  double eps1 = 0;
  Vec4 nu0 = Vec4::Zero();
  Vec4 nu1 = Vec4::Zero();
  int iterations = 0;
  double residual = 0;
  double bc_defect = 0;
  double arclength = 0;
  double sigma_min = 0, sigma_max = 0;
  Orbit orbit;
};

struct ContinuationOptions {
  int nodes = 601;
  double newton_tol = 1e-10;
  double bc_tol = 1e-8;
  double ds_init = 0.05;
  double ds_min = 1e-7;
  double ds_max = 0.4;
  double max_dtheta = 0.1;  // per-step cap in the normalized path parameter
  int max_steps = 600;
  int node_cap = 4000;
  double remesh_ratio = 2.5;
  bool estimate_sigma = false;
};

enum class ContinuationStatus { Converged, StepSizeCollapse };

struct ContinuationResult {
  ContinuationStatus status = ContinuationStatus::Converged;
  std::vector<BranchPoint> branch;
  std::string message;
};

// One-parameter family of boundary-value problems: params and start
// direction as functions of the path coordinate theta.
struct ParamPath {
  std::function<Params(double)> at;
  std::function<Vec4(double)> nu0;
};

namespace het {

// Anchor rows are scaled by 1/eps0: in absolute form the translation of the
// orbit along itself is a near-null direction of the Newton matrix (it moves
// the anchor only at O(eps0)), which stalls the damped iteration.
inline double anchor_scale(double eps0) { return 1.0 / std::max(std::abs(eps0), 1e-4); }

inline CollocationProblem plain_problem(const Params& pr, const Vec4& nu0, const HetBc& bc,
                                        double eps0_ref) {
  CollocationProblem pb;
  pb.f = [pr](const Vec4& x, const Eigen::VectorXd&) { return slow_field(x, pr); };
  pb.fjac = [pr](const Vec4& x, const Eigen::VectorXd&) { return slow_jacobian(x, pr); };
  pb.n_extras = 1;  // eps0
  pb.n_bc = 5;
  const double sc = anchor_scale(eps0_ref);
  pb.bc = [bc, nu0, sc](const Vec4& XL, const Vec4& XR, const Eigen::VectorXd& ex) {
    Eigen::VectorXd g(5);
    g.head<4>() = sc * (XL - (bc.M0 + ex[0] * nu0));
    g[4] = bc.unstable_defect(XR);
    return g;
  };
  return pb;
}

inline CollocationProblem path_problem(const ParamPath& path, double eps0_ref) {
  CollocationProblem pb;
  pb.f = [path](const Vec4& x, const Eigen::VectorXd& ex) { return slow_field(x, path.at(ex[1])); };
  pb.fjac = [path](const Vec4& x, const Eigen::VectorXd& ex) {
    return slow_jacobian(x, path.at(ex[1]));
  };
  pb.n_extras = 2;  // eps0, theta
  pb.n_bc = 5;
  const double sc = anchor_scale(eps0_ref);
  pb.bc = [path, sc](const Vec4& XL, const Vec4& XR, const Eigen::VectorXd& ex) {
    const HetBc bc = HetBc::make(path.at(ex[1]));
    Eigen::VectorXd g(5);
    g.head<4>() = sc * (XL - (bc.M0 + ex[0] * path.nu0(ex[1])));
    g[4] = bc.unstable_defect(XR);
    return g;
  };
  return pb;
}

inline Orbit orbit_of(const std::vector<double>& mesh, const Eigen::VectorXd& U, const Params& pr,
                      double eps0, const Vec4& nu0) {
  Orbit orb;
  orb.eta = mesh;
  orb.states.resize(mesh.size());
  for (size_t i = 0; i < mesh.size(); ++i) orb.states[i] = U.segment<4>(4 * int(i));
  orb.params = pr;
  orb.boundary.eta_max = mesh.back();
  orb.boundary.eps0 = eps0;
  orb.boundary.nu0 = nu0;
  const HetBc bc = HetBc::make(pr);
  bc.end_data(orb.back_state(), orb.boundary.eps1, orb.boundary.nu1);
  return orb;
}

inline BranchPoint make_point(const std::vector<double>& mesh, const Eigen::VectorXd& U,
                              const Params& pr, const Vec4& nu0, int stage, double theta,
                              const NewtonReport& rep) {
  BranchPoint bp;
  bp.params = pr;
  bp.stage = stage;
  bp.theta = theta;
  bp.eps0 = U[4 * int(mesh.size())];
  bp.nu0 = nu0;
  bp.iterations = rep.iterations;
  bp.residual = rep.residual;
  bp.orbit = orbit_of(mesh, U, pr, bp.eps0, nu0);
  bp.eps1 = bp.orbit.boundary.eps1;
  bp.nu1 = bp.orbit.boundary.nu1;
  bp.bc_defect = boundary_defect(bp.orbit, pr, bp.orbit.boundary).lpNorm<Eigen::Infinity>();
  return bp;
}

// weighted tangent/arclength inner product: orbit entries averaged so the
// parameter components keep O(1) influence regardless of mesh size
inline Eigen::VectorXd arc_weights(int n_orbit, int n_extras) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n_orbit + n_extras, 1.0 / n_orbit);
  w.tail(n_extras).setOnes();
  return w;
}

}  // namespace het

// Solves the anchored projection BVP at fixed parameters with eps0 free.
// `guess` supplies the mesh and states; the converged BranchPoint keeps the
// same mesh.
inline BranchPoint solve_bvp(const Orbit& guess, const Params& pr, const Vec4& nu0,
                             const ContinuationOptions& opt = {}) {
  const HetBc bc = HetBc::make(pr);
  CollocationProblem pb = het::plain_problem(pr, nu0, bc, guess.boundary.eps0);
  const int N = int(guess.size());
  Eigen::VectorXd U(4 * N + 1);
  for (int i = 0; i < N; ++i) U.segment<4>(4 * i) = guess.states[i];
  U[4 * N] = guess.boundary.eps0;
  NewtonOptions nopt;
  nopt.tol = opt.newton_tol;
  nopt.stall_tol = opt.bc_tol;
  NewtonReport rep = newton_solve(pb, guess.eta, U, nopt);
  if (!rep.converged)
    throw NewtonDivergence("solve_bvp: Newton did not converge", rep.history);
  BranchPoint bp = het::make_point(guess.eta, U, pr, nu0, 0, 0.0, rep);
  if (opt.estimate_sigma) {
    const auto A = colloc::jacobian(pb, guess.eta, U);
    std::tie(bp.sigma_max, bp.sigma_min) = extreme_singular_values(A);
  }
  return bp;
}

// Pseudo-arclength continuation of the anchored projection BVP along a
// ParamPath from theta0 to theta1, with secant predictor, step halving on
// Newton failure and a final clamped solve exactly at theta1.
inline ContinuationResult continue_path(const Orbit& start, const ParamPath& path, double theta0,
                                        double theta1, int stage,
                                        const ContinuationOptions& opt = {}) {
  ContinuationResult res;
  std::vector<double> mesh = start.eta;
  const int N = int(mesh.size());
  const int n_orbit = 4 * N;

  auto plain_solve_at = [&](double theta, Eigen::VectorXd& U, NewtonReport& rep) {
    const Params pr = path.at(theta);
    const HetBc bc = HetBc::make(pr);
    CollocationProblem pb = het::plain_problem(pr, path.nu0(theta), bc, U[n_orbit]);
    Eigen::VectorXd Up(n_orbit + 1);
    Up.head(n_orbit) = U.head(n_orbit);
    Up[n_orbit] = U[n_orbit];
    NewtonOptions nopt;
    nopt.tol = opt.newton_tol;
    nopt.stall_tol = opt.bc_tol;
    rep = newton_solve(pb, mesh, Up, nopt);
    if (rep.converged) U.head(n_orbit + 1) = Up;
    return rep.converged;
  };

  const Eigen::VectorXd W = het::arc_weights(n_orbit, 2);
  auto wnorm = [&](const Eigen::VectorXd& v) { return std::sqrt(v.cwiseProduct(W).dot(v)); };

  // bordered corrector: collocation + anchored boundary rows + the
  // pseudo-arclength row <U - U_ref, tan>_W = ds, solved for (orbit, eps0,
  // theta) together
  auto bordered_solve = [&](Eigen::VectorXd& Uext, const Eigen::VectorXd& U_ref,
                            const Eigen::VectorXd& tan, double ds_loc,
                            NewtonReport& rep) -> bool {
    CollocationProblem pb = het::path_problem(path, Uext[n_orbit]);
    pb.has_dense = true;
    pb.dense_row = [&W, U_ref, tan, ds_loc](const Eigen::VectorXd& u) {
      return (u - U_ref).cwiseProduct(W).dot(tan) - ds_loc;
    };
    pb.dense_grad = [&W, tan](const Eigen::VectorXd&) {
      return Eigen::VectorXd(W.cwiseProduct(tan));
    };
    NewtonOptions nopt;
    nopt.tol = opt.newton_tol;
    nopt.stall_tol = opt.bc_tol;
    rep = newton_solve(pb, mesh, Uext, nopt);
    return rep.converged;
  };

  // extended unknown vector [orbit; eps0; theta]
  Eigen::VectorXd U0(n_orbit + 2), U1(n_orbit + 2);
  Eigen::VectorXd e_theta = Eigen::VectorXd::Zero(n_orbit + 2);
  e_theta[n_orbit + 1] = 1.0;
  {
    Eigen::VectorXd U(n_orbit + 2);
    for (int i = 0; i < N; ++i) U.segment<4>(4 * i) = start.states[i];
    U[n_orbit] = start.boundary.eps0;
    U[n_orbit + 1] = theta0;
    NewtonReport rep;
    if (!plain_solve_at(theta0, U, rep))
      throw NewtonDivergence("continue_path: start point did not converge", rep.history);
    res.branch.push_back(
        het::make_point(mesh, U, path.at(theta0), path.nu0(theta0), stage, theta0, rep));
    res.branch.back().arclength = 0.0;
    U0 = U;

    // second point for the secant tangent: corrector along the pure
    // parameter direction
    double dth = (theta1 > theta0 ? 1.0 : -1.0) *
                 std::min(opt.max_dtheta * 0.25, std::abs(theta1 - theta0) * 0.05);
    for (;;) {
      Eigen::VectorXd Ut = U0;
      Ut[n_orbit + 1] = theta0 + dth;
      NewtonReport rep2;
      if (bordered_solve(Ut, U0, e_theta, dth, rep2)) {
        U1 = Ut;
        const double th = U1[n_orbit + 1];
        res.branch.push_back(
            het::make_point(mesh, U1, path.at(th), path.nu0(th), stage, th, rep2));
        break;
      }
      dth *= 0.5;
      if (std::abs(dth) < 1e-10) {
        res.status = ContinuationStatus::StepSizeCollapse;
        res.message = "continue_path: could not take the first step";
        return res;
      }
    }
  }

  double ds = opt.ds_init;
  double arc = 0.0;

  for (int step = 0; step < opt.max_steps; ++step) {
    const double theta_cur = U1[n_orbit + 1];
    if ((theta1 - theta_cur) * (theta1 - theta0) <= 0.0 ||
        std::abs(theta_cur - theta1) < 1e-12) {
      // passed or reached the target: clamp to theta1 exactly
      Eigen::VectorXd Uf = U1;
      const double th_prev = U0[n_orbit + 1];
      if (std::abs(theta_cur - th_prev) > 1e-14) {
        const double w = (theta1 - th_prev) / (theta_cur - th_prev);
        Uf = U0 + w * (U1 - U0);
      }
      Uf[n_orbit + 1] = theta1;
      NewtonReport repf;
      if (!bordered_solve(Uf, Uf, e_theta, 0.0, repf))
        throw NewtonDivergence("continue_path: clamped solve at the target failed", repf.history);
      res.branch.push_back(
          het::make_point(mesh, Uf, path.at(theta1), path.nu0(theta1), stage, theta1, repf));
      res.branch.back().arclength = arc;
      return res;
    }

    Eigen::VectorXd tan = U1 - U0;
    const double tn = wnorm(tan);
    if (tn == 0) {
      res.status = ContinuationStatus::StepSizeCollapse;
      res.message = "continue_path: zero tangent";
      return res;
    }
    tan /= tn;
    // keep the path-parameter advance bounded
    double ds_eff = ds;
    if (std::abs(tan[n_orbit + 1]) * ds_eff > opt.max_dtheta)
      ds_eff = opt.max_dtheta / std::abs(tan[n_orbit + 1]);

    bool accepted = false;
    for (; ds_eff >= opt.ds_min;) {
      Eigen::VectorXd Up = U1 + ds_eff * tan;
      NewtonReport rep;
      if (bordered_solve(Up, U1, tan, ds_eff, rep)) {
        U0 = U1;
        U1 = Up;
        arc += ds_eff;
        const double th = U1[n_orbit + 1];
        res.branch.push_back(
            het::make_point(mesh, U1, path.at(th), path.nu0(th), stage, th, rep));
        res.branch.back().arclength = arc;
        if (rep.iterations <= 4) ds = std::min(ds_eff * 1.4, opt.ds_max);
        else if (rep.iterations >= 8) ds = ds_eff * 0.6;
        else ds = ds_eff;
        accepted = true;
        break;
      }
      ds_eff *= 0.5;
    }
    if (!accepted) {
      res.status = ContinuationStatus::StepSizeCollapse;
      res.message = "continue_path: step size collapsed at theta = " +
                    std::to_string(U1[n_orbit + 1]);
      return res;
    }
  }
  res.status = ContinuationStatus::StepSizeCollapse;
  res.message = "continue_path: step budget exhausted";
  return res;
}

// Step 3: drive (alpha, m) linearly to the target and the rate fraction
// lambda/lambda_max linearly between the two endpoints, nu0 = X02 throughout.
inline ParamPath parameter_path(const Params& from, const Params& to) {
  const double f0 = from.lambda / lambda_max(from);
  const double f1 = to.lambda / lambda_max(to);
  ParamPath path;
  path.at = [from, to, f0, f1](double mu) {
    Params p;
    p.alpha = (1.0 - mu) * from.alpha + mu * to.alpha;
    p.m = (1.0 - mu) * from.m + mu * to.m;
    p.n = to.n;
    const double f = (1.0 - mu) * f0 + mu * f1;
    p.lambda = f * lambda_max(p.alpha, p.m, p.n);
    return p;
  };
  const auto at = path.at;
  path.nu0 = [at](double mu) {
    const Spectrum s0 = spectrum_M0(at(mu));
    return Vec4(s0.vectors.col(1).normalized());
  };
  return path;
}

// Step 4: rotate nu0 from X02 to X01 inside the unstable subspace at fixed
// parameters; the eigenbasis is re-evaluated at every step.
inline ParamPath direction_path(const Params& pr) {
  ParamPath path;
  path.at = [pr](double) { return pr; };
  path.nu0 = [pr](double phi) {
    const Spectrum s0 = spectrum_M0(pr);
    const Vec4 X01u = s0.vectors.col(0).normalized();
    const Vec4 X02u = s0.vectors.col(1).normalized();
    return Vec4((std::cos(phi) * X02u + std::sin(phi) * X01u).normalized());
  };
  return path;
}

inline ContinuationResult continue_parameters(const Orbit& start, const Params& target,
                                              const ContinuationOptions& opt = {}) {
  validate_params(target);  // RangeError pre-check on infeasible targets
  const ParamPath path = parameter_path(start.params, target);
  return continue_path(start, path, 0.0, 1.0, 3, opt);
}

inline ContinuationResult continue_direction(const Orbit& start, const Params& pr,
                                             const ContinuationOptions& opt = {}) {
  const ParamPath path = direction_path(pr);
  return continue_path(start, path, 0.0, M_PI / 2.0, 4, opt);
}

struct KappaFit {
  double kappa1 = 0;
  double eta0 = 0;
  double slope = 0;          // regression slope of log|chi - M0|
  double rel_residual = 0;   // vector-fit residual relative to |kappa1 X01|
  int window_size = 0;
};

// Least-squares fit of e^{-2 eta}(chi - M0) ~ kappa1 X01 over the backward
// window (the first quarter of the mesh restricted to the linear regime),
// plus the translation eta0 = log(Gamma0/(Sigma0 kappa1))/2 that adapts the
// orbit to the data.
inline KappaFit fit_kappa(const Orbit& orbit, double Gamma0, double Sigma0) {
  const Params& pr = orbit.params;
  const Spectrum s0 = spectrum_M0(pr);
  const Vec4 M0 = s0.point;
  const Vec4 X01 = s0.vectors.col(0);  // Appendix normalization, p-component 1
  const Vec4 M1 = equilibrium_M1(pr);
  const double amp_cap = 0.05 * (1.0 + (M1 - M0).norm());

  const size_t quarter = orbit.size() / 4;
  std::vector<size_t> idx;
  for (size_t i = 0; i < quarter; ++i) {
    const double d = (orbit.states[i] - M0).norm();
    if (d > 0 && d <= amp_cap) idx.push_back(i);
  }
  if (idx.size() < 4) throw TangencyFailure("fit_kappa: too few nodes in the linear window");

  double num = 0, den = 0;
  for (size_t i : idx) {
    const Vec4 v = std::exp(-2.0 * orbit.eta[i]) * (orbit.states[i] - M0);
    num += v.dot(X01);
    den += X01.squaredNorm();
  }
  KappaFit fit;
  fit.kappa1 = num / den;
  fit.window_size = int(idx.size());

  double resid2 = 0, ref2 = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i : idx) {
    const Vec4 v = std::exp(-2.0 * orbit.eta[i]) * (orbit.states[i] - M0);
    resid2 += (v - fit.kappa1 * X01).squaredNorm();
    ref2 += (fit.kappa1 * X01).squaredNorm();
    const double ld = std::log((orbit.states[i] - M0).norm());
    sx += orbit.eta[i];
    sy += ld;
    sxx += orbit.eta[i] * orbit.eta[i];
    sxy += orbit.eta[i] * ld;
  }
  const double nn = double(idx.size());
  fit.slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  fit.rel_residual = std::sqrt(resid2 / std::max(ref2, 1e-300));
  if (fit.rel_residual > 0.10)
    throw TangencyFailure("fit_kappa: fit residual exceeds 10% of |kappa1 X01|");
  if (!(fit.kappa1 > 0)) throw TangencyFailure("fit_kappa: kappa1 is not positive");
  fit.eta0 = 0.5 * std::log(Gamma0 / (Sigma0 * fit.kappa1));
  return fit;
}

struct HeteroclinicRun {
  BranchPoint final_point;
  std::vector<BranchPoint> branch;  // stages 3 and 4 concatenated
};

// Steps 2-4 end to end: verify the manufactured seed orbit, continue the
// parameters to the target, then rotate the start direction to X01.
inline Orbit remesh_orbit(const Orbit& orb, int nodes) {
  Orbit out = orb;
  const auto mesh = equidistributed_mesh(orb.eta, orb.states, nodes);
  std::vector<Vec4> F(orb.size());
  for (size_t i = 0; i < orb.size(); ++i) F[i] = slow_field(orb.states[i], orb.params);
  out.eta = mesh;
  out.states = hermite_resample(orb.eta, orb.states, F, mesh);
  return out;
}

inline HeteroclinicRun run_heteroclinic(const Orbit& seed, const Params& target,
                                        const ContinuationOptions& opt = {}) {
  if (opt.nodes > opt.node_cap) throw MeshError("run_heteroclinic: node cap exceeded");
  Orbit start = remesh_orbit(seed, opt.nodes);

  HeteroclinicRun run;
  ContinuationResult st3 = continue_parameters(start, target, opt);
  if (st3.status != ContinuationStatus::Converged)
    throw NewtonDivergence("run_heteroclinic: stage 3 failed: " + st3.message, {});
  run.branch = st3.branch;

  ContinuationResult st4 =
      continue_direction(remesh_orbit(st3.branch.back().orbit, opt.nodes), target, opt);
  if (st4.status != ContinuationStatus::Converged)
    throw NewtonDivergence("run_heteroclinic: stage 4 failed: " + st4.message, {});
  run.branch.insert(run.branch.end(), st4.branch.begin(), st4.branch.end());

  // final polish with sigma estimates at nu0 = X01
  ContinuationOptions fo = opt;
  fo.estimate_sigma = true;
  const Spectrum s0 = spectrum_M0(target);
  run.final_point = solve_bvp(st4.branch.back().orbit, target,
                              Vec4(s0.vectors.col(0).normalized()), fo);
  run.final_point.stage = 4;
  run.final_point.theta = M_PI / 2.0;
  return run;
}

}  // namespace shearband
