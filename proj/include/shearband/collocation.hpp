#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <functional>
#include <vector>

#include "shearband/errors.hpp"
#include "shearband/model.hpp"

namespace shearband {

// Two-point boundary value problem for a 4D autonomous field, discretized by
// 3-stage Lobatto IIIA collocation (the condensed Simpson form, order 4).
// Unknowns are the mesh values plus `n_extras` scalars (anchor amplitudes,
// continuation parameters); closure needs n_bc + dense rows = 4 + n_extras.
struct CollocationProblem {
  std::function<Vec4(const Vec4&, const Eigen::VectorXd&)> f;
  std::function<Mat4(const Vec4&, const Eigen::VectorXd&)> fjac;
  std::function<Eigen::VectorXd(const Vec4&, const Vec4&, const Eigen::VectorXd&)> bc;
  int n_bc = 0;
  int n_extras = 0;
  std::function<double(const Eigen::VectorXd&)> dense_row;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> dense_grad;
  bool has_dense = false;

  int rows(int n_nodes) const { return 4 * (n_nodes - 1) + n_bc + (has_dense ? 1 : 0); }
  int cols(int n_nodes) const { return 4 * n_nodes + n_extras; }
};

namespace colloc {

inline Vec4 node(const Eigen::VectorXd& U, int i) { return U.segment<4>(4 * i); }

inline Eigen::VectorXd extras_of(const CollocationProblem& pb, const Eigen::VectorXd& U) {
  return U.tail(pb.n_extras);
}

inline Eigen::VectorXd residual(const CollocationProblem& pb, const std::vector<double>& mesh,
                                const Eigen::VectorXd& U) {
  const int N = int(mesh.size()) - 1;
  const Eigen::VectorXd ex = U.tail(pb.n_extras);
  Eigen::VectorXd G(pb.rows(N + 1));
  G.head(pb.n_bc) = pb.bc(node(U, 0), node(U, N), ex);
  std::vector<Vec4> F(N + 1);
  for (int i = 0; i <= N; ++i) F[i] = pb.f(node(U, i), ex);
  for (int i = 0; i < N; ++i) {
    const double h = mesh[i + 1] - mesh[i];
    const Vec4 Xi = node(U, i), Xj = node(U, i + 1);
    const Vec4 Xm = 0.5 * (Xi + Xj) + h / 8.0 * (F[i] - F[i + 1]);
    const Vec4 Fm = pb.f(Xm, ex);
    G.segment<4>(pb.n_bc + 4 * i) = Xj - Xi - h / 6.0 * (F[i] + 4.0 * Fm + F[i + 1]);
  }
  if (pb.has_dense) G[G.size() - 1] = pb.dense_row(U);
  return G;
}

inline Eigen::SparseMatrix<double> jacobian(const CollocationProblem& pb,
                                            const std::vector<double>& mesh,
                                            const Eigen::VectorXd& U) {
  const int N = int(mesh.size()) - 1;
  const int nrows = pb.rows(N + 1), ncols = pb.cols(N + 1);
  const Eigen::VectorXd ex = U.tail(pb.n_extras);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(size_t(N) * 36 + 64);

  // boundary rows by central differences
  {
    const Vec4 X0 = node(U, 0), XN = node(U, N);
    auto push_bc_block = [&](int col0, auto eval) {
      for (int j = 0; j < 4; ++j) {
        const double dj = 1e-7 * (1.0 + std::abs(U[col0 + j]));
        const Eigen::VectorXd gp = eval(j, dj), gm = eval(j, -dj);
        for (int r = 0; r < pb.n_bc; ++r)
          trip.emplace_back(r, col0 + j, (gp[r] - gm[r]) / (2.0 * dj));
      }
    };
    push_bc_block(0, [&](int j, double d) {
      Vec4 Xp = X0;
      Xp[j] += d;
      return pb.bc(Xp, XN, ex);
    });
    push_bc_block(4 * N, [&](int j, double d) {
      Vec4 Xp = XN;
      Xp[j] += d;
      return pb.bc(X0, Xp, ex);
    });
    for (int j = 0; j < pb.n_extras; ++j) {
      const double dj = 1e-7 * (1.0 + std::abs(ex[j]));
      Eigen::VectorXd exp_ = ex, exm = ex;
      exp_[j] += dj;
      exm[j] -= dj;
      const Eigen::VectorXd gp = pb.bc(X0, XN, exp_), gm = pb.bc(X0, XN, exm);
      for (int r = 0; r < pb.n_bc; ++r)
        trip.emplace_back(r, 4 * (N + 1) + j, (gp[r] - gm[r]) / (2.0 * dj));
    }
  }

  // collocation blocks
  std::vector<Vec4> F(N + 1);
  std::vector<Mat4> J(N + 1);
  for (int i = 0; i <= N; ++i) {
    F[i] = pb.f(node(U, i), ex);
    J[i] = pb.fjac(node(U, i), ex);
  }
  for (int i = 0; i < N; ++i) {
    const double h = mesh[i + 1] - mesh[i];
    const Vec4 Xi = node(U, i), Xj = node(U, i + 1);
    const Vec4 Xm = 0.5 * (Xi + Xj) + h / 8.0 * (F[i] - F[i + 1]);
    const Mat4 Jm = pb.fjac(Xm, ex);
    const Mat4 I = Mat4::Identity();
    const Mat4 Ai = -I - h / 6.0 * (J[i] + 4.0 * Jm * (0.5 * I + h / 8.0 * J[i]));
    const Mat4 Aj = I - h / 6.0 * (J[i + 1] + 4.0 * Jm * (0.5 * I - h / 8.0 * J[i + 1]));
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        trip.emplace_back(pb.n_bc + 4 * i + r, 4 * i + c, Ai(r, c));
        trip.emplace_back(pb.n_bc + 4 * i + r, 4 * (i + 1) + c, Aj(r, c));
      }
    // extras columns of the interval residual, by differencing the field
    for (int j = 0; j < pb.n_extras; ++j) {
      const double dj = 1e-7 * (1.0 + std::abs(ex[j]));
      Eigen::VectorXd exp_ = ex, exm = ex;
      exp_[j] += dj;
      exm[j] -= dj;
      const Vec4 Fip = pb.f(Xi, exp_), Fjp = pb.f(Xj, exp_);
      const Vec4 Fim = pb.f(Xi, exm), Fjm = pb.f(Xj, exm);
      const Vec4 Xmp = 0.5 * (Xi + Xj) + h / 8.0 * (Fip - Fjp);
      const Vec4 Xmm = 0.5 * (Xi + Xj) + h / 8.0 * (Fim - Fjm);
      const Vec4 Rp = -h / 6.0 * (Fip + 4.0 * pb.f(Xmp, exp_) + Fjp);
      const Vec4 Rm = -h / 6.0 * (Fim + 4.0 * pb.f(Xmm, exm) + Fjm);
      for (int r = 0; r < 4; ++r)
        trip.emplace_back(pb.n_bc + 4 * i + r, 4 * (N + 1) + j, (Rp[r] - Rm[r]) / (2.0 * dj));
    }
  }

  if (pb.has_dense) {
    const Eigen::VectorXd g = pb.dense_grad(U);
    for (int c = 0; c < ncols; ++c)
      if (g[c] != 0.0) trip.emplace_back(nrows - 1, c, g[c]);
  }

  Eigen::SparseMatrix<double> A(nrows, ncols);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

}  // namespace colloc

struct NewtonOptions {
  int max_iterations = 14;
  double tol = 1e-10;
  // a stalled line search still counts as converged below this level; the
  // heteroclinic system has a weak translation-like direction along which
  // residuals cannot be pushed to the sharp tolerance
  double stall_tol = 1e-8;
  int max_backtracks = 8;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  std::vector<double> history;
};

// Damped Newton on the collocation system; U is updated in place.
inline NewtonReport newton_solve(const CollocationProblem& pb, const std::vector<double>& mesh,
                                 Eigen::VectorXd& U, const NewtonOptions& opt = {}) {
  NewtonReport rep;
  if (pb.rows(int(mesh.size())) != pb.cols(int(mesh.size())))
    throw MeshError("newton_solve: system is not square");
  Eigen::VectorXd G = colloc::residual(pb, mesh, U);
  double gn = G.lpNorm<Eigen::Infinity>();
  rep.history.push_back(gn);
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (gn <= opt.tol) {
      rep.converged = true;
      rep.iterations = it;
      rep.residual = gn;
      return rep;
    }
    Eigen::SparseMatrix<double> A = colloc::jacobian(pb, mesh, U);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw NewtonDivergence("newton_solve: singular collocation Jacobian", rep.history);
    Eigen::VectorXd d = lu.solve(-G);
    // one round of iterative refinement; the anchored system can be stiff
    // enough that the raw solve leaves the boundary rows at 1e-9
    d += lu.solve(-G - A * d);

    auto try_step = [&](const Eigen::VectorXd& dir) {
      double t = 1.0;
      for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
        const Eigen::VectorXd Ut = U + t * dir;
        const Eigen::VectorXd Gt = colloc::residual(pb, mesh, Ut);
        const double gt = Gt.lpNorm<Eigen::Infinity>();
        if (gt < (1.0 - 1e-4 * t) * gn || gt <= opt.tol) {
          U = Ut;
          G = Gt;
          gn = gt;
          return true;
        }
        t *= 0.5;
      }
      return false;
    };

    bool accepted = try_step(d);
    if (!accepted) {
      // The anchored heteroclinic system carries a near-null pseudo-family
      // (orbit translation); the raw Newton step can ride it far outside the
      // quadratic region.  Damp it Levenberg-Marquardt style.
      const Eigen::SparseMatrix<double> At = A.transpose();
      Eigen::SparseMatrix<double> P = (At * A).pruned();
      const double dscale = P.diagonal().mean();
      const Eigen::VectorXd rhs = -(At * G);
      for (double mu : {1e-12, 1e-9, 1e-6, 1e-3}) {
        Eigen::SparseMatrix<double> Pmu = P;
        for (int k = 0; k < Pmu.outerSize(); ++k) Pmu.coeffRef(k, k) += mu * dscale;
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
        ldlt.compute(Pmu);
        if (ldlt.info() != Eigen::Success) continue;
        const Eigen::VectorXd dm = ldlt.solve(rhs);
        if (try_step(dm)) {
          accepted = true;
          break;
        }
      }
    }
    rep.history.push_back(gn);
    if (!accepted) {
      rep.iterations = it + 1;
      rep.residual = gn;
      rep.converged = gn <= opt.stall_tol;
      return rep;
    }
  }
  rep.iterations = opt.max_iterations;
  rep.residual = gn;
  rep.converged = gn <= std::max(opt.tol, opt.stall_tol);
  return rep;
}

// sigma_max / sigma_min estimates of the Newton matrix by power iteration;
// used as the transversality proxy at converged solutions.
inline std::pair<double, double> extreme_singular_values(const Eigen::SparseMatrix<double>& A,
                                                         int iters = 40) {
  const int n = int(A.cols());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
  double smax = 0;
  for (int i = 0; i < iters; ++i) {
    v = (A.transpose() * (A * v)).eval();
    const double nv = v.norm();
    if (nv == 0) break;
    smax = std::sqrt(nv);
    v /= nv;
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu, luT;
  lu.compute(A);
  Eigen::SparseMatrix<double> At = A.transpose();
  luT.compute(At);
  if (lu.info() != Eigen::Success || luT.info() != Eigen::Success) return {smax, 0.0};
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n).normalized();
  double inv2 = 0;
  for (int i = 0; i < iters; ++i) {
    w = luT.solve(lu.solve(w)).eval();
    const double nw = w.norm();
    if (!std::isfinite(nw) || nw == 0) return {smax, 0.0};
    inv2 = nw;
    w /= nw;
  }
  return {smax, 1.0 / std::sqrt(inv2)};
}

// Cubic Hermite resampling of a trajectory onto a new mesh.
inline std::vector<Vec4> hermite_resample(const std::vector<double>& eta,
                                          const std::vector<Vec4>& X, const std::vector<Vec4>& F,
                                          const std::vector<double>& eta_new) {
  std::vector<Vec4> out(eta_new.size());
  size_t k = 0;
  for (size_t j = 0; j < eta_new.size(); ++j) {
    const double t = std::clamp(eta_new[j], eta.front(), eta.back());
    while (k + 2 < eta.size() && eta[k + 1] < t) ++k;
    const double h = eta[k + 1] - eta[k];
    const double s = (t - eta[k]) / h;
    const double s2 = s * s, s3 = s2 * s;
    out[j] = (2 * s3 - 3 * s2 + 1) * X[k] + (s3 - 2 * s2 + s) * h * F[k] +
             (-2 * s3 + 3 * s2) * X[k + 1] + (s3 - s2) * h * F[k + 1];
  }
  return out;
}

// Mesh equidistributing arclength plus an r-derivative monitor.
inline std::vector<double> equidistributed_mesh(const std::vector<double>& eta,
                                                const std::vector<Vec4>& X, int n_nodes,
                                                double r_weight = 2.0) {
  const size_t N = eta.size();
  std::vector<double> cum(N, 0.0);
  for (size_t i = 0; i + 1 < N; ++i) {
    const double h = eta[i + 1] - eta[i];
    const Vec4 sl = (X[i + 1] - X[i]) / h;
    const double m = std::sqrt(1.0 + sl.squaredNorm() + r_weight * sl[2] * sl[2]);
    cum[i + 1] = cum[i] + m * h;
  }
  std::vector<double> out(n_nodes);
  out.front() = eta.front();
  out.back() = eta.back();
  size_t k = 0;
  for (int j = 1; j + 1 < n_nodes; ++j) {
    const double target = cum.back() * j / double(n_nodes - 1);
    while (k + 2 < N && cum[k + 1] < target) ++k;
    const double w = (target - cum[k]) / (cum[k + 1] - cum[k]);
    out[j] = eta[k] + w * (eta[k + 1] - eta[k]);
  }
  return out;
}

}  // namespace shearband
