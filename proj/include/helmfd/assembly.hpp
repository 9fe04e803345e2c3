#pragma once

// Global system assembly and direct sparse solution. Grid stencils depend only
// on the lattice row, so a mesh that is invariant under rotation by P theta
// columns gives an operator that commutes with that rotation; the solve then
// splits into K = n_theta / P independent blocks after a DFT across sectors.

#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>
#include <unsupported/Eigen/FFT>
#include <spdlog/spdlog.h>

#include "helmfd/boundary.hpp"
#include "helmfd/error.hpp"
#include "helmfd/mesh.hpp"
#include "helmfd/pde.hpp"
#include "helmfd/stencil_pollution.hpp"

namespace helmfd {

/// Dirichlet data on the scatterer as a function of the Cartesian point.
using BoundaryFn = std::function<cplx(double, double)>;

struct Problem {
  double kappa = 1.0;
  SourceFn f;    // empty: f = 0
  BoundaryFn g;  // empty: g = 0
};

/// PML transform that matches the mesh: LinearS in (s, theta), QuadraticR in (r, theta).
inline PdeModel pde_for_mesh(const Mesh& m, double kappa, double t = 1.0) {
  PdeModel p;
  p.coords = m.coords;
  p.kappa = kappa;
  p.transform = m.coords == Coords::Stretched ? make_linear_s(kappa, m.q_star(), m.q_max(), t)
                                              : make_quadratic_r(kappa, m.r_star(), m.r_max());
  return p;
}

/// Grid stencils cached by (row, local factor, kind).
class StencilBank {
 public:
  StencilBank(const Mesh& m, const PdeModel& pde, MinimizeOptions opt) : m_(m), pde_(pde), opt_(opt) {}

  const Stencil& at(int id) {
    const auto& n = m_.nodes[std::size_t(id)];
    const StencilKind kind = grid_stencil_kind(m_, id);
    const auto key = std::make_tuple(n.i, n.factor, int(kind));
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto pts = to_points(reference_offsets(kind), m_.theta_scale());
    Stencil s = minimized_stencil(pde_, kind, m_.q(id), m_.local_h(id), pts, pde_.max_order(), opt_);
    return cache_.emplace(key, std::move(s)).first->second;
  }

  const std::map<std::tuple<int, int, int>, Stencil>& all() const { return cache_; }

 private:
  const Mesh& m_;
  const PdeModel& pde_;
  MinimizeOptions opt_;
  std::map<std::tuple<int, int, int>, Stencil> cache_;
};

struct RowTerm {
  int node;
  cplx c;
};

/// Stencil row of a representative node, in the frame of sector 0.
struct NodeRow {
  std::vector<RowTerm> terms;
  std::vector<std::pair<Point2, cplx>> boundary;
  const Stencil* grid = nullptr;
};

struct Assembly {
  const Mesh* mesh = nullptr;
  PdeModel pde;
  Problem problem;
  LatticeRotation rot;
  std::vector<int> unknown_of;  // node -> unknown index, -1 for Dirichlet nodes
  std::vector<int> node_of;     // unknown -> node
  std::vector<int> rep_of;      // node -> representative node in sector 0
  std::vector<int> shift_of;    // node -> sector index
  std::vector<int> reps;        // representative unknown nodes
  std::vector<int> rep_index;   // node -> index into reps (representatives only)
  std::vector<NodeRow> rows;    // per representative
  std::vector<cplx> dirichlet;  // known nodal values
  Eigen::VectorXcd rhs;         // per unknown

  std::size_t unknowns() const { return node_of.size(); }
  int copies() const { return rot.copies; }

  int rotated(int node, int sector) const {
    if (sector == 0) return node;
    return rotate_node(*mesh, node, sector * rot.period);
  }
};

namespace detail {

inline cplx source_term(const Assembly& a, const Stencil& s, int node) {
  if (!a.problem.f || s.source_weights.size() == 0) return 0.0;
  const Mesh& m = *a.mesh;
  auto df = a.pde.source_partials(a.problem.f, m.q(node), m.theta(node), s.order - 1);
  cplx r = 0.0;
  for (Eigen::Index k = 0; k < s.source_weights.size(); ++k) r += s.source_weights[k] * df[std::size_t(k)];
  return r;
}

}  // namespace detail

/// Rows for every unknown node: grid stencils from the bank, boundary stencils
/// (keyed by representative node) for NearBoundary nodes. RHS collects the
/// source functional and the known Dirichlet and boundary values.
inline Assembly assemble(const Mesh& m, const PdeModel& pde, const Problem& prob, StencilBank& bank,
                         const std::unordered_map<int, BoundaryStencil>& bstencils = {},
                         LatticeRotation rot = {}) {
  Assembly a;
  a.mesh = &m;
  a.pde = pde;
  a.problem = prob;
  if (rot.period == 0) {
    if (m.count(NodeClass::NearBoundary) == 0) {
      rot.period = m.rotation_period();
      rot.copies = m.n_theta / rot.period;
    } else {
      rot = {m.n_theta, 1};
    }
  }
  if (m.n_theta % rot.period != 0 || m.n_theta / rot.period != rot.copies)
    throw Error(ErrorCode::MeshInconsistent, "rotation does not tile the theta lattice");
  a.rot = rot;

  const std::size_t n = m.size();
  a.unknown_of.assign(n, -1);
  a.rep_of.assign(n, -1);
  a.shift_of.assign(n, 0);
  a.rep_index.assign(n, -1);
  a.dirichlet.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& nd = m.nodes[k];
    if (nd.cls == NodeClass::DirichletScatterer && m.scatterer_on_grid && nd.i == 0 && prob.g)
      a.dirichlet[k] = prob.g(m.x(int(k)), m.y(int(k)));
    if (is_dirichlet(nd.cls)) continue;
    a.unknown_of[k] = int(a.node_of.size());
    a.node_of.push_back(int(k));
    const int rep = m.find(nd.i, nd.j % rot.period);
    a.rep_of[k] = rep;
    a.shift_of[k] = nd.j / rot.period;
    if (rep == int(k)) {
      a.rep_index[k] = int(a.reps.size());
      a.reps.push_back(int(k));
    }
  }

  a.rows.resize(a.reps.size());
  for (std::size_t r = 0; r < a.reps.size(); ++r) {
    const int id = a.reps[r];
    NodeRow& row = a.rows[r];
    if (m.nodes[std::size_t(id)].cls == NodeClass::NearBoundary) {
      auto it = bstencils.find(id);
      if (it == bstencils.end()) throw Error(ErrorCode::MissingStencil, "no boundary stencil for node " + std::to_string(id));
      const BoundaryStencil& b = it->second;
      for (std::size_t p = 0; p < b.nodes.size(); ++p) row.terms.push_back({b.nodes[p], b.coeffs[p]});
      for (std::size_t p = 0; p < b.bpoints.size(); ++p) row.boundary.push_back({b.bpoints[p], b.coeffs[b.nodes.size() + p]});
      continue;
    }
    const Stencil& s = bank.at(id);
    const auto ids = footprint(m, id, s.kind);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (ids[p] < 0) throw Error(ErrorCode::MeshInconsistent, "stencil footprint leaves the mesh at node " + std::to_string(id));
      row.terms.push_back({ids[p], s.coeffs[p]});
    }
    row.grid = &s;
  }

  a.rhs = Eigen::VectorXcd::Zero(Eigen::Index(a.unknowns()));
  for (std::size_t u = 0; u < a.unknowns(); ++u) {
    const int node = a.node_of[u];
    const int sector = a.shift_of[std::size_t(node)];
    const NodeRow& row = a.rows[std::size_t(a.rep_index[std::size_t(a.rep_of[std::size_t(node)])])];
    cplx v = 0.0;
    for (auto& t : row.terms) {
      const int col = a.rotated(t.node, sector);
      if (is_dirichlet(m.nodes[std::size_t(col)].cls)) v -= t.c * a.dirichlet[std::size_t(col)];
    }
    if (prob.g) {
      const double ang = sector * rot.period * m.ut;
      for (auto& [p, c] : row.boundary) {
        const Point2 q = rotate_point(p, ang);
        v -= c * prob.g(q[0], q[1]);
      }
    }
    if (row.grid) v += detail::source_term(a, *row.grid, node);
    a.rhs[Eigen::Index(u)] = v;
  }
  return a;
}

/// Plain sparse system (all unknowns), used for dumps and small problems.
struct LinearSystem {
  Eigen::SparseMatrix<cplx> A;
  Eigen::VectorXcd b;
};

inline LinearSystem to_linear_system(const Assembly& a) {
  LinearSystem s;
  const Eigen::Index n = Eigen::Index(a.unknowns());
  std::vector<Eigen::Triplet<cplx>> trip;
  for (std::size_t u = 0; u < a.unknowns(); ++u) {
    const int node = a.node_of[u];
    const int sector = a.shift_of[std::size_t(node)];
    const NodeRow& row = a.rows[std::size_t(a.rep_index[std::size_t(a.rep_of[std::size_t(node)])])];
    for (auto& t : row.terms) {
      const int col = a.unknown_of[std::size_t(a.rotated(t.node, sector))];
      if (col >= 0) trip.emplace_back(Eigen::Index(u), col, t.c);
    }
  }
  s.A.resize(n, n);
  s.A.setFromTriplets(trip.begin(), trip.end());
  s.b = a.rhs;
  return s;
}

struct SolveReport {
  double residual = 0.0;  // ||Ax - b||_inf / ||b||_inf (absolute when b = 0)
  bool residual_ok = true;
  int blocks = 1;
  std::size_t block_size = 0;
  double seconds = 0.0;
};

struct LinearSolution {
  Eigen::VectorXcd x;
  SolveReport report;
};

inline double relative_residual(const Eigen::VectorXcd& r, const Eigen::VectorXcd& b) {
  const double nb = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
  const double nr = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  return nb > 0.0 ? nr / nb : nr;
}

/// Direct LU solve of a plain system.
inline LinearSolution solve(const LinearSystem& s, double residual_tol = 1e-10) {
  const auto t0 = std::chrono::steady_clock::now();
  LinearSolution out;
  Eigen::UmfPackLU<Eigen::SparseMatrix<cplx>> lu;
  lu.compute(s.A);
  if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "sparse LU factorisation failed");
  out.x = lu.solve(s.b);
  if (!out.x.allFinite()) throw Error(ErrorCode::SingularSystem, "sparse LU produced non-finite values");
  out.report.residual = relative_residual(s.A * out.x - s.b, s.b);
  out.report.residual_ok = out.report.residual <= residual_tol;
  out.report.block_size = std::size_t(s.A.rows());
  out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.report.residual_ok) spdlog::warn("linear solve residual {:.3e} above {:.1e}", out.report.residual, residual_tol);
  return out;
}

/// Nodal solution: unknowns from the solve, Dirichlet values elsewhere.
struct SolutionField {
  std::vector<cplx> v;
  SolveReport report;
};

/// A x - b for the assembled operator, without forming the global matrix.
inline Eigen::VectorXcd apply_residual(const Assembly& a, const std::vector<cplx>& v) {
  Eigen::VectorXcd r(Eigen::Index(a.unknowns()));
  const Mesh& m = *a.mesh;
  for (std::size_t u = 0; u < a.unknowns(); ++u) {
    const int node = a.node_of[u];
    const int sector = a.shift_of[std::size_t(node)];
    const NodeRow& row = a.rows[std::size_t(a.rep_index[std::size_t(a.rep_of[std::size_t(node)])])];
    cplx s = 0.0;
    for (auto& t : row.terms) {
      const int col = a.rotated(t.node, sector);
      if (!is_dirichlet(m.nodes[std::size_t(col)].cls)) s += t.c * v[std::size_t(col)];
    }
    r[Eigen::Index(u)] = s - a.rhs[Eigen::Index(u)];
  }
  return r;
}

/// Block solve over the K sectors of the rotation.
inline SolutionField solve(const Assembly& a, double residual_tol = 1e-10) {
  const auto t0 = std::chrono::steady_clock::now();
  const int K = a.rot.copies;
  const Eigen::Index nr = Eigen::Index(a.reps.size());
  const Mesh& m = *a.mesh;

  // sector copies of every representative
  std::vector<int> copy_unknown(std::size_t(nr) * std::size_t(K));
  for (Eigen::Index r = 0; r < nr; ++r)
    for (int d = 0; d < K; ++d) {
      const int node = a.rotated(a.reps[std::size_t(r)], d);
      copy_unknown[std::size_t(r) * std::size_t(K) + std::size_t(d)] = a.unknown_of[std::size_t(node)];
    }

  // forward DFT of the right-hand side across sectors
  Eigen::FFT<double> fft;
  Eigen::MatrixXcd Fh(K, nr);
  {
    std::vector<cplx> in(static_cast<std::size_t>(K)), out;
    for (Eigen::Index r = 0; r < nr; ++r) {
      for (int d = 0; d < K; ++d) in[std::size_t(d)] = a.rhs[copy_unknown[std::size_t(r) * std::size_t(K) + std::size_t(d)]];
      fft.fwd(out, in);
      for (int k = 0; k < K; ++k) Fh(k, r) = out[std::size_t(k)] / double(K);
    }
  }

  // block operators and solves
  struct Entry {
    int row, col, shift;
    cplx c;
  };
  std::vector<Entry> entries;
  for (Eigen::Index r = 0; r < nr; ++r)
    for (auto& t : a.rows[std::size_t(r)].terms) {
      if (is_dirichlet(m.nodes[std::size_t(t.node)].cls)) continue;
      const int rep = a.rep_of[std::size_t(t.node)];
      entries.push_back({int(r), a.rep_index[std::size_t(rep)], a.shift_of[std::size_t(t.node)], t.c});
    }
  Eigen::MatrixXcd Uh(K, nr);
  std::vector<cplx> phase(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    for (int d = 0; d < K; ++d) phase[std::size_t(d)] = std::polar(1.0, 2.0 * M_PI * double((std::int64_t(k) * d) % K) / K);
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(entries.size());
    for (auto& e : entries) trip.emplace_back(e.row, e.col, e.c * phase[std::size_t(e.shift)]);
    Eigen::SparseMatrix<cplx> Ak(nr, nr);
    Ak.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXcd fk = Fh.row(k).transpose();
    if (fk.cwiseAbs().maxCoeff() == 0.0) {
      Uh.row(k).setZero();
      continue;
    }
    Eigen::UmfPackLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(Ak);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "sparse LU failed on block " + std::to_string(k));
    Eigen::VectorXcd uk = lu.solve(fk);
    if (!uk.allFinite()) throw Error(ErrorCode::SingularSystem, "non-finite block solution");
    Uh.row(k) = uk.transpose();
  }

  // back to sectors
  SolutionField out;
  out.v = a.dirichlet;
  {
    std::vector<cplx> in(static_cast<std::size_t>(K)), res;
    for (Eigen::Index r = 0; r < nr; ++r) {
      for (int k = 0; k < K; ++k) in[std::size_t(k)] = Uh(k, r);
      fft.inv(res, in);
      for (int d = 0; d < K; ++d) {
        const int u = copy_unknown[std::size_t(r) * std::size_t(K) + std::size_t(d)];
        out.v[std::size_t(a.node_of[std::size_t(u)])] = res[std::size_t(d)] * double(K);
      }
    }
  }
  out.report.residual = relative_residual(apply_residual(a, out.v), a.rhs);
  out.report.residual_ok = out.report.residual <= residual_tol;
  out.report.blocks = K;
  out.report.block_size = std::size_t(nr);
  out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.report.residual_ok) spdlog::warn("linear solve residual {:.3e} above {:.1e}", out.report.residual, residual_tol);
  return out;
}

/// Triplet text dump: one "row col re im" line per stored entry.
inline void write_triplets(const LinearSystem& s, std::ostream& os) {
  os.precision(17);
  os << "# rows " << s.A.rows() << " cols " << s.A.cols() << " nnz " << s.A.nonZeros() << '\n';
  for (int k = 0; k < s.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(s.A, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

}  // namespace helmfd
