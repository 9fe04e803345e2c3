#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "helmfd/assembly.hpp"
#include "helmfd/boundary.hpp"
#include "helmfd/verify.hpp"

using namespace helmfd;

namespace {

Mesh series_mesh(int n, double kappa, double kd) {
  MeshOptions o;
  o.refinement = Refinement::UniformDyadic;
  return build_stretched(3.0, 3.0 + kd / kappa, n, 1.0, o);
}

BoundaryFn series_data(const SeriesSolution& s) {
  return [s](double x, double y) { return series_trace(s, std::atan2(y, x)); };
}

// full sparse solve of the same assembly, scattered back to nodes
std::vector<cplx> direct_solution(const Assembly& a) {
  const LinearSolution ls = solve(to_linear_system(a));
  std::vector<cplx> v(a.dirichlet);
  for (std::size_t u = 0; u < a.unknowns(); ++u) v[std::size_t(a.node_of[u])] = ls.x[Eigen::Index(u)];
  return v;
}

}  // namespace

TEST(LinearSolve, IdentityAndRandomSystem) {
  LinearSystem s;
  s.A.resize(4, 4);
  s.A.setIdentity();
  s.b = Eigen::VectorXcd::LinSpaced(4, 1.0, 4.0);
  auto r = solve(s);
  EXPECT_LT((r.x - s.b).cwiseAbs().maxCoeff(), 1e-15);

  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  const int n = 60;
  std::vector<Eigen::Triplet<cplx>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, cplx(10.0 + nd(rng), nd(rng)));
    for (int k = 0; k < 4; ++k) t.emplace_back(i, int(rng() % n), cplx(nd(rng), nd(rng)));
  }
  s.A.resize(n, n);
  s.A.setFromTriplets(t.begin(), t.end());
  s.b = Eigen::VectorXcd::Random(n);
  r = solve(s);
  EXPECT_TRUE(r.report.residual_ok);
  EXPECT_LT(relative_residual(s.A * r.x - s.b, s.b), 1e-12);
}

TEST(Assembly, HomogeneousProblemIsExactlyZero) {
  const Mesh m = series_mesh(64, 5.0, 20.0);
  const PdeModel pde = pde_for_mesh(m, 5.0);
  StencilBank bank(m, pde, {});
  const Assembly a = assemble(m, pde, Problem{5.0, {}, {}}, bank);
  const SolutionField sol = solve(a);
  for (auto& x : sol.v) EXPECT_EQ(x, cplx(0.0));
  EXPECT_EQ(sol.report.residual, 0.0);
}

TEST(Assembly, BlockSolveMatchesDirectSolve) {
  const double kappa = 5.0;
  const Mesh m = series_mesh(48, kappa, 10.0);
  const PdeModel pde = pde_for_mesh(m, kappa);
  StencilBank bank(m, pde, {});
  const Assembly a = assemble(m, pde, Problem{kappa, {}, series_data(modal_series(kappa))}, bank);
  EXPECT_GT(a.copies(), 1);
  const SolutionField sol = solve(a);
  const auto v = direct_solution(a);
  double d = 0.0, s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) d = std::max(d, std::abs(v[k] - sol.v[k])), s = std::max(s, std::abs(v[k]));
  EXPECT_LT(d, 1e-11 * s);
  EXPECT_LT(relative_residual(apply_residual(a, sol.v), a.rhs), 1e-10);
}

TEST(Assembly, BlockSolveWithBoundaryStencils) {
  const double kappa = 20.0;
  MeshOptions o;
  o.scatterer_on_grid = false;
  o.quantum = 2;
  Mesh m = build_stretched(3.0, 4.0, 192, 0.49, o);
  const auto g = make_polar_curve(1.0, 0.5, 8);
  const auto rot = lattice_rotation(m, g);
  const auto near = detect_boundary_nodes(m, g, rot);
  std::unordered_map<int, BoundaryStencil> bs;
  for (int id : near)
    if (m.nodes[std::size_t(id)].j < rot.period) bs.emplace(id, boundary_stencil(m, g, id, kappa));
  const PdeModel pde = pde_for_mesh(m, kappa, 0.5);
  StencilBank bank(m, pde, {});
  const BoundaryFn pw = [kappa](double x, double) { return std::polar(1.0, kappa * x); };
  const Assembly a = assemble(m, pde, Problem{kappa, {}, pw}, bank, bs, rot);
  EXPECT_EQ(a.copies(), 8);
  const SolutionField sol = solve(a);
  const auto v = direct_solution(a);
  double d = 0.0, s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) d = std::max(d, std::abs(v[k] - sol.v[k])), s = std::max(s, std::abs(v[k]));
  EXPECT_LT(d, 1e-10 * s);
}

TEST(Assembly, SeriesProblemAccuracy) {
  const double kappa = 5.0;
  const Mesh m = series_mesh(96, kappa, 20.0);
  const PdeModel pde = pde_for_mesh(m, kappa);
  StencilBank bank(m, pde, {});
  const SeriesSolution ser = modal_series(kappa);
  const Assembly a = assemble(m, pde, Problem{kappa, {}, series_data(ser)}, bank);
  const SolutionField sol = solve(a);
  const ErrorNorms e = error_norms(m, sol.v, series_on_mesh(ser, m, pde));
  EXPECT_LT(e.linf, 2e-4);
  EXPECT_GT(e.compared, 0u);

  // generic stencils on the same mesh are clearly worse
  MinimizeOptions generic;
  generic.pollution = false;
  StencilBank gbank(m, pde, generic);
  const SolutionField gen = solve(assemble(m, pde, Problem{kappa, {}, series_data(ser)}, gbank));
  EXPECT_GT(error_norms(m, gen.v, series_on_mesh(ser, m, pde)).linf, 3.0 * e.linf);
}

TEST(Assembly, TripletDump) {
  const Mesh m = series_mesh(32, 5.0, 10.0);
  const PdeModel pde = pde_for_mesh(m, 5.0);
  StencilBank bank(m, pde, {});
  const LinearSystem s = to_linear_system(assemble(m, pde, Problem{5.0, {}, series_data(modal_series(5.0))}, bank));
  std::ostringstream os;
  write_triplets(s, os);
  std::istringstream is(os.str());
  std::string line;
  long lines = 0;
  while (std::getline(is, line)) ++lines;
  EXPECT_EQ(lines, s.A.nonZeros() + 1);
  EXPECT_EQ(s.A.rows(), Eigen::Index(m.unknowns()));
}
