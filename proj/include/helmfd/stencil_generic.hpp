#pragma once

// Generic high-order stencils: Taylor coefficients with two or more normal
// derivatives are eliminated through the PDE, then the order conditions are
// solved level by level in powers of h.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "helmfd/error.hpp"
#include "helmfd/pde.hpp"
#include "helmfd/stencil.hpp"

namespace helmfd {

/// Index of l = (l1, l2), l1 <= 1, in the reduced basis.
inline int basis_index(int l1, int l2) {
  const int t = l1 + l2;
  return t == 0 ? 0 : 2 * t - 1 + l1;
}
inline int basis_size(int order) { return 2 * order + 1; }

namespace detail {

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace detail

/// Every derivative d^m v at the center, |m| <= M+1, as a linear combination
/// of the reduced unknowns d^l v (l1 <= 1) followed by the partials of ft
/// (|k| <= M-1, Jet2 index order).
struct TaylorTable {
  int M = 0;
  int nb = 0, ns = 0;
  std::vector<Eigen::VectorXcd> rows;  // indexed by Jet2::index(m1, m2)

  const Eigen::VectorXcd& operator()(int m1, int m2) const { return rows[Jet2::index(m1, m2)]; }
};

inline TaylorTable taylor_table(const SideCoefficients& c, int M) {
  TaylorTable T;
  T.M = M;
  T.nb = basis_size(M + 1);
  T.ns = int(Jet2::size_for(std::max(M - 1, 0)));
  if (M < 1) T.ns = 0;
  const int K = M + 1, n = T.nb + T.ns;
  T.rows.assign(Jet2::size_for(K), Eigen::VectorXcd::Zero(n));
  for (int k1 = 0; k1 <= K; ++k1)
    for (int k2 = 0; k1 + k2 <= K; ++k2) {
      Eigen::VectorXcd& r = T.rows[Jet2::index(k1, k2)];
      if (k1 <= 1) {
        r[basis_index(k1, k2)] = 1.0;
        continue;
      }
      const int n1 = k1 - 2;
      for (int m = 0; m <= n1; ++m) {
        const double w = detail::binom(n1, m);
        r += w * c.a[std::size_t(m)] * T.rows[Jet2::index(n1 - m, k2 + 2)];
        r += w * c.b[std::size_t(m)] * T.rows[Jet2::index(n1 - m + 1, k2)];
        r += w * c.kt[std::size_t(m)] * T.rows[Jet2::index(n1 - m, k2)];
      }
      r[T.nb + int(Jet2::index(n1, k2))] += 1.0;
    }
  return T;
}

/// A^k_l(p) and the source functional F(p) for one stencil.
struct ExpansionTable {
  int M = 0;
  int nb = 0, ns = 0;
  double h = 0.0;
  /// A[p](k, l): coefficient of h^k d^l v (left-sided on the interface).
  std::vector<Eigen::MatrixXcd> A;
  /// F(p, i): weight of the i-th source partial (h powers included).
  Eigen::MatrixXcd F;
};

namespace detail {

// Accumulate the expansion of v(xi + p h) from a Taylor table.
inline void expand_point(const TaylorTable& T, StencilPoint p, double h, cplx l1_factor, bool with_source,
                         Eigen::MatrixXcd& A, Eigen::Ref<Eigen::VectorXcd> F) {
  const int K = T.M + 1;
  for (int m1 = 0; m1 <= K; ++m1)
    for (int m2 = 0; m1 + m2 <= K; ++m2) {
      const double mono = std::pow(p.x1, m1) * std::pow(p.x2, m2) / (factorial(m1) * factorial(m2));
      if (mono == 0.0) continue;
      const Eigen::VectorXcd& r = T(m1, m2);
      const int k = m1 + m2;
      for (int l = 0; l < T.nb; ++l) {
        // odd basis positions past zero hold l1 = 0, even ones l1 = 1
        const bool normal = l > 0 && l % 2 == 0;
        A(k, l) += mono * r[l] * (normal ? l1_factor : cplx(1.0));
      }
      if (with_source) F += (mono * std::pow(h, k)) * r.tail(T.ns);
    }
}

}  // namespace detail

/// Expansion table about (q, .) for points in units of h. On the interface the
/// right-side expansion is folded through d^l v+ = beta^{l1} d^l v-.
inline ExpansionTable expansion_table(const PdeModel& pde, double q, double h, const std::vector<StencilPoint>& pts,
                                      int M) {
  if (M > pde.max_order())
    throw Error(ErrorCode::InvalidParameter, "order " + std::to_string(M) + " exceeds the supported maximum");
  const bool interface = q == pde.transform.q_star;
  const TaylorTable TL = taylor_table(pde.coefficients(q, Side::Left, M), M);
  TaylorTable TR;
  if (interface) TR = taylor_table(pde.coefficients(q, Side::Right, M), M);
  const cplx beta = pde.beta();
  ExpansionTable E;
  E.M = M;
  E.nb = TL.nb;
  E.ns = TL.ns;
  E.h = h;
  E.F = Eigen::MatrixXcd::Zero(Eigen::Index(pts.size()), TL.ns);
  const bool src_left = !pde.in_pml(q);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(M + 2, TL.nb);
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(TL.ns);
    if (interface && pts[i].x1 > 0.0)
      detail::expand_point(TR, pts[i], h, beta, false, A, f);
    else
      detail::expand_point(TL, pts[i], h, 1.0, src_left, A, f);
    E.A.push_back(std::move(A));
    E.F.row(Eigen::Index(i)) = f.transpose();
  }
  return E;
}

/// c_{p,j}: rows are stencil points, columns j = 0..M+1.
struct GenericSolution {
  Eigen::MatrixXcd c;
  int nullity = 0;
};

inline Eigen::VectorXcd combine_powers(const Eigen::MatrixXcd& c, double h) {
  Eigen::VectorXcd C = Eigen::VectorXcd::Zero(c.rows());
  double hp = 1.0;
  for (Eigen::Index j = 0; j < c.cols(); ++j, hp *= h) C += hp * c.col(j);
  return C;
}

inline GenericSolution solve_cpj(const ExpansionTable& E, double rank_tol = 1e-9) {
  const int M = E.M, np = int(E.A.size());
  // Row l of the level-j system uses A^{|l| + shift}_l.
  auto level_matrix = [&](int nrows, int shift) {
    Eigen::MatrixXcd B(nrows, np);
    for (int l = 0; l < nrows; ++l) {
      const int t = (l + 1) / 2;
      for (int p = 0; p < np; ++p) {
        const int k = t + shift;
        B(l, p) = k <= M + 1 ? E.A[std::size_t(p)](k, l) : cplx(0.0);
      }
    }
    return B;
  };
  GenericSolution out;
  out.c = Eigen::MatrixXcd::Zero(np, M + 2);

  Eigen::MatrixXcd B0 = level_matrix(basis_size(M + 1), 0);
  Eigen::VectorXd scale(B0.rows());
  for (Eigen::Index r = 0; r < B0.rows(); ++r) {
    const double m = B0.row(r).cwiseAbs().maxCoeff();
    scale[r] = m > 0.0 ? 1.0 / m : 0.0;
  }
  Eigen::MatrixXcd S0 = scale.asDiagonal() * B0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(S0, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > rank_tol * smax) ++rank;
  out.nullity = np - rank;
  if (out.nullity == 0) throw Error(ErrorCode::NoNontrivialSolution, "zeroth-order system has only the trivial solution");
  if (out.nullity > 1)
    throw Error(ErrorCode::RankDeficient,
                "zeroth-order system has a " + std::to_string(out.nullity) + "-dimensional solution space");
  Eigen::VectorXcd c0 = svd.matrixV().col(np - 1);
  if (std::abs(c0[0]) < 1e-12 * c0.cwiseAbs().maxCoeff())
    throw Error(ErrorCode::NoNontrivialSolution, "zeroth-order stencil vanishes at the center");
  c0 /= c0[0];
  out.c.col(0) = c0;

  for (int j = 1; j <= M + 1; ++j) {
    const int nrows = basis_size(M + 1 - j);
    Eigen::MatrixXcd Bj = level_matrix(nrows, 0);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(nrows);
    for (int k = 0; k < j; ++k) rhs -= level_matrix(nrows, j - k) * out.c.col(k);
    Eigen::VectorXd sc(nrows);
    for (int r = 0; r < nrows; ++r) {
      const double m = Bj.row(r).cwiseAbs().maxCoeff();
      sc[r] = m > 0.0 ? 1.0 / m : 1.0;
    }
    Bj = sc.asDiagonal() * Bj;
    rhs = sc.asDiagonal() * rhs;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(Bj);
    cod.setThreshold(rank_tol);
    Eigen::VectorXcd x = cod.solve(rhs);
    x -= x[0] * c0;
    const double res = (Bj * x - rhs).norm(), ref = std::max(rhs.norm(), Bj.norm() * x.norm());
    if (ref > 0.0 && res > 1e-8 * ref)
      throw Error(ErrorCode::Inconsistent, "order-condition system at level " + std::to_string(j) + " is inconsistent");
    out.c.col(j) = x;
  }
  return out;
}

/// RHS weights: RHS = w . (partials of ft at the center).
inline Eigen::VectorXcd source_weights(const ExpansionTable& E, const Eigen::VectorXcd& C) {
  return E.F.transpose() * C;
}

/// Residual of the expansion at a point: sum_l sum_k A^k_l h^k d^l v + F . Df.
inline cplx expansion_value(const ExpansionTable& E, std::size_t p, const Eigen::VectorXcd& dl,
                            const Eigen::VectorXcd& df) {
  cplx s = 0.0;
  double hk = 1.0;
  for (int k = 0; k <= E.M + 1; ++k, hk *= E.h) s += hk * (E.A[p].row(k) * dl)(0, 0);
  if (E.ns) s += (E.F.row(Eigen::Index(p)) * df)(0, 0);
  return s;
}

/// Generic stencil at the given points; coefficients are center-normalised.
inline Stencil generic_stencil(const PdeModel& pde, StencilKind kind, double q, double h,
                               const std::vector<StencilPoint>& pts, int M) {
  const ExpansionTable E = expansion_table(pde, q, h, pts, M);
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

/// L_h v - sum_p C_p F(p) for exact nodal values vals and source partials df.
inline cplx local_truncation(const Stencil& s, const std::vector<cplx>& vals, const Eigen::VectorXcd& df) {
  cplx r = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) r += s.coeffs[i] * vals[i];
  if (df.size() && s.source_weights.size()) r -= (s.source_weights.transpose() * df)(0, 0);
  return r;
}

inline std::vector<StencilPoint> to_points(const std::vector<Offset>& off, double theta_scale = 1.0) {
  std::vector<StencilPoint> p;
  p.reserve(off.size());
  for (auto& o : off) p.push_back({double(o[0]), double(o[1]) * theta_scale});
  return p;
}

}  // namespace helmfd
