#pragma once

// Pollution-minimised stencils: coefficients with unit centre that minimise the
// action of the stencil on a family of Helmholtz solutions (plane waves in the
// physical region, their outgoing continuation in the layer), written as a
// truncated sum over Fourier modes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "helmfd/error.hpp"
#include "helmfd/specfun.hpp"
#include "helmfd/stencil_generic.hpp"

namespace helmfd {

enum class TestRegion { Regular, Layer };

/// Physical (complex) polar description of one stencil point.
struct ModePoint {
  cplx radius;  // kappa is applied later
  double phi;   // angle relative to the stencil centre
};

namespace detail {

// J_j(kappa r_p) e^{ij phi_p}, or J_j(kappa r*) H_j(kappa r_p)/H_j(kappa r*) e^{ij phi_p},
// for j = -J..J in rows, points in columns.
inline Eigen::MatrixXcd mode_matrix(TestRegion region, double kappa, double r_star, const std::vector<ModePoint>& pts,
                                    int J) {
  const Eigen::Index np = Eigen::Index(pts.size());
  Eigen::MatrixXcd B(2 * J + 1, np);
  std::vector<cplx> jstar;
  if (region == TestRegion::Layer) jstar = specfun::bessel_j_sequence(kappa * r_star, J);
  for (Eigen::Index p = 0; p < np; ++p) {
    const cplx z = kappa * pts[std::size_t(p)].radius;
    std::vector<cplx> f;
    if (region == TestRegion::Regular) {
      f = specfun::bessel_j_sequence(z, J);
    } else {
      f = specfun::hankel1_ratio_sequence(z, kappa * r_star, J);
      for (int j = 0; j <= J; ++j) f[std::size_t(j)] *= jstar[std::size_t(j)];
    }
    const double phi = pts[std::size_t(p)].phi;
    for (int j = 0; j <= J; ++j) {
      const cplx e = std::polar(1.0, j * phi);
      const double sgn = (j % 2 == 0) ? 1.0 : -1.0;
      B(J + j, p) = f[std::size_t(j)] * e;
      if (j > 0) B(J - j, p) = sgn * f[std::size_t(j)] * std::conj(e);
    }
  }
  return B;
}

}  // namespace detail

struct ModeMatrix {
  Eigen::MatrixXcd B;  // rows: modes -J..J, columns: stencil points
  int J = 0;
};

/// Mode matrix with the truncation grown until the outermost band carries less
/// than 1e-18 of every Gram diagonal entry.
inline ModeMatrix test_function_modes(TestRegion region, double kappa, double r_star, const std::vector<ModePoint>& pts,
                                      int j_cap = 2000) {
  double rmax = 0.0;
  for (auto& p : pts) rmax = std::max(rmax, std::abs(p.radius));
  int J = std::min(j_cap, int(std::ceil(kappa * rmax)) + 20);
  for (;;) {
    ModeMatrix m{detail::mode_matrix(region, kappa, r_star, pts, J), J};
    bool ok = true;
    for (Eigen::Index p = 0; p < m.B.cols() && ok; ++p) {
      const double diag = m.B.col(p).squaredNorm();
      const double band = std::norm(m.B(0, p)) + std::norm(m.B(2 * J, p));
      if (band >= 1e-18 * diag) ok = false;
    }
    if (ok || J >= j_cap) return m;
    J = std::min(j_cap, J + 20);
  }
}

/// Hermitian Gram matrix W = B^H B + delta I.
inline Eigen::MatrixXcd gram(const ModeMatrix& m, double delta) {
  Eigen::MatrixXcd W = m.B.adjoint() * m.B;
  W.diagonal().array() += delta;
  return W;
}

/// Unregularised objective: squared l2 norm of the mode vector B a.
inline double objective_tilde(const ModeMatrix& m, const Eigen::VectorXcd& a) { return (m.B * a).squaredNorm(); }

inline double objective(const ModeMatrix& m, const Eigen::VectorXcd& a, double delta) {
  return objective_tilde(m, a) + delta * a.squaredNorm();
}

/// Minimiser of the objective over a with a[0] = 1. The normal equations of
/// the reduced Gram system are replaced by the equivalent stacked least-squares
/// problem [B_r; sqrt(delta) I] x = -[b_0; 0].
inline Eigen::VectorXcd minimize(const ModeMatrix& m, double delta) {
  const Eigen::Index np = m.B.cols(), nm = m.B.rows();
  for (int attempt = 0; attempt < 8; ++attempt) {
    const Eigen::Index rows = nm + (delta > 0.0 ? np - 1 : 0);
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(rows, np - 1);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(rows);
    A.topRows(nm) = m.B.rightCols(np - 1);
    rhs.head(nm) = -m.B.col(0);
    if (delta > 0.0) A.bottomRows(np - 1).diagonal().setConstant(std::sqrt(delta));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(A);
    if (qr.rank() == np - 1) {
      Eigen::VectorXcd a(np);
      a[0] = 1.0;
      a.tail(np - 1) = qr.solve(rhs);
      if (a.allFinite()) return a;
    }
    delta = std::max(delta, 1e-14) * 10.0;
  }
  throw Error(ErrorCode::SingularGram, "reduced Gram system is singular");
}

/// Regularisation: zero for non-boundary stencils of the physical region,
/// otherwise max(0.01 I~(a*), 1e-14).
struct DeltaPolicy {
  double factor = 0.01;
  double floor = 1e-14;
};

inline double delta_policy(bool boundary, bool regular_region, double tilde_at_unregularized, DeltaPolicy p = {}) {
  if (!boundary && regular_region) return 0.0;
  return std::max(p.factor * tilde_at_unregularized, p.floor);
}

/// Use the generic coefficients instead of minimisation when kappa h < threshold.
inline bool generic_fallback_gate(double kappa, double local_h, bool boundary, double threshold = 0.15) {
  if (boundary) return false;
  return kappa * local_h < threshold;
}

struct MinimizeResult {
  Eigen::VectorXcd coeffs;
  double delta = 0.0;
  double tilde = 0.0;       // I~ at the returned coefficients
  double tilde_star = 0.0;  // I~ at the unregularised minimiser
  double min_eig = 0.0;     // smallest eigenvalue of the regularised Gram matrix
  int J = 0;
};

inline MinimizeResult minimize_with_policy(const ModeMatrix& m, bool boundary, bool regular_region, DeltaPolicy p = {}) {
  MinimizeResult r;
  r.J = m.J;
  Eigen::VectorXcd a = minimize(m, 0.0);
  r.tilde_star = objective_tilde(m, a);
  r.delta = delta_policy(boundary, regular_region, r.tilde_star, p);
  if (r.delta > 0.0) a = minimize(m, r.delta);
  r.coeffs = a;
  r.tilde = objective_tilde(m, a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram(m, r.delta), Eigen::EigenvaluesOnly);
  r.min_eig = es.eigenvalues()[0];
  return r;
}

/// Mode points of a grid stencil centred at q: complex radius R(q + x1 h) and
/// angle x2 h.
inline std::vector<ModePoint> grid_mode_points(const PdeModel& pde, double q, double h,
                                               const std::vector<StencilPoint>& pts) {
  std::vector<ModePoint> out;
  out.reserve(pts.size());
  for (auto& p : pts) {
    const double qp = q + p.x1 * h;
    out.push_back({pde.transform.radius(qp, qp > pde.transform.q_star ? Side::Right : Side::Left), p.x2 * h});
  }
  return out;
}

/// Physical mesh size seen by the fallback gate.
inline double physical_h(const PdeModel& pde, double q, double h) {
  return pde.coords == Coords::Stretched ? std::exp(std::min(q, pde.transform.q_star)) * h : h;
}

struct MinimizeOptions {
  bool pollution = true;
  double gate = 0.15;
  DeltaPolicy delta;
};

/// Pollution-minimised (or gated generic) stencil for a grid node.
inline Stencil minimized_stencil(const PdeModel& pde, StencilKind kind, double q, double h,
                                 const std::vector<StencilPoint>& pts, int M, const MinimizeOptions& opt = {}) {
  const ExpansionTable E = expansion_table(pde, q, h, pts, M);
  const bool regular = q < pde.transform.q_star;
  if (!opt.pollution || generic_fallback_gate(pde.kappa, physical_h(pde, q, h), false, opt.gate)) {
    const GenericSolution g = solve_cpj(E);
    Eigen::VectorXcd C = combine_powers(g.c, h);
    C /= C[0];
    Stencil s;
    s.kind = kind;
    s.points = pts;
    s.coeffs.assign(C.data(), C.data() + C.size());
    s.source_weights = source_weights(E, C);
    s.q = q;
    s.h = h;
    s.order = M;
    return s;
  }
  const TestRegion region = q <= pde.transform.q_star ? TestRegion::Regular : TestRegion::Layer;
  const ModeMatrix mm = test_function_modes(region, pde.kappa, pde.transform.r_star(), grid_mode_points(pde, q, h, pts));
  const MinimizeResult r = minimize_with_policy(mm, false, regular, opt.delta);
  Stencil s;
  s.kind = kind;
  s.points = pts;
  s.coeffs.assign(r.coeffs.data(), r.coeffs.data() + r.coeffs.size());
  s.source_weights = source_weights(E, r.coeffs);
  s.q = q;
  s.h = h;
  s.order = M;
  s.minimized = true;
  s.delta = r.delta;
  s.modes = r.J;
  s.objective = r.tilde;
  s.min_eig = r.min_eig;
  return s;
}

}  // namespace helmfd
