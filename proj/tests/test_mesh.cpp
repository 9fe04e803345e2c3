#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helmfd/mesh.hpp"

using namespace helmfd;

namespace {

Mesh refined(int n, double r_star = 4.0, double r_max = 5.0, bool pml = true) {
  MeshOptions o;
  o.refinement = Refinement::UniformDyadic;
  o.pml_coarsening = pml;
  return build_stretched(r_star, r_max, n, 1.0, o);
}

}  // namespace

TEST(Mesh, RegularPolarReferenceSize) {
  const double rs = std::exp(0.5 * M_PI);
  auto m = build_regular_polar(rs, 1.25 * rs, 2304, 1.0);
  EXPECT_DOUBLE_EQ(m.h, 2.0 * M_PI * rs / 2304);
  const int id = m.find(m.i_star, 0);
  ASSERT_GE(id, 0);
  EXPECT_EQ(m.nodes[std::size_t(id)].cls, NodeClass::Interface);
  EXPECT_EQ(m.radius(id), m.r_star());
  EXPECT_NEAR(m.r_star(), rs, m.h);
  EXPECT_NEAR(m.r_max(), 1.25 * rs, m.h);
}

TEST(Mesh, RegularPolarUniformTheta) {
  auto m = build_regular_polar(2.0, 2.5, 16, 1.0);
  for (auto& r : m.rows) EXPECT_EQ(r.count, 16);
  EXPECT_DOUBLE_EQ(m.ut, 2.0 * M_PI / 16);
  EXPECT_EQ(m.count(NodeClass::DanglingS) + m.count(NodeClass::Auxiliary), 0u);
}

TEST(Mesh, InterfaceAndDirichletRows) {
  for (auto m : {build_regular_polar(3.0, 4.0, 64, 1.0), refined(128)}) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      const auto& n = m.nodes[k];
      EXPECT_EQ(n.cls == NodeClass::Interface, n.i == m.i_star);
      EXPECT_EQ(n.cls == NodeClass::DirichletOuter, n.i == m.i_max);
      EXPECT_EQ(n.cls == NodeClass::DirichletScatterer, n.i == 0);
    }
    EXPECT_EQ(m.q_star(), m.q_of(m.i_star));
    EXPECT_EQ(m.count(NodeClass::NearBoundary), 0u);
  }
}

TEST(Mesh, NoRefinementNoTransitions) {
  auto m = build_stretched(4.0, 5.0, 128, 1.0);
  EXPECT_EQ(m.count(NodeClass::DanglingS), 0u);
  EXPECT_EQ(m.count(NodeClass::Auxiliary), 0u);
  for (std::size_t k = 0; k < m.size(); ++k) EXPECT_EQ(m.local_h(int(k)), m.uq);
}

TEST(Mesh, TwoTransitionsAcrossTwiceLog2) {
  const double rs = std::exp(2.0 * std::log(2.0) + 0.35);
  auto m = refined(256, rs, 1.2 * rs);
  ASSERT_EQ(m.transitions.size(), 2u);
  const double d1 = m.q_star() - m.q_of(m.transitions[0]), d2 = m.q_of(m.transitions[0]) - m.q_of(m.transitions[1]);
  EXPECT_NEAR(d1, std::log(2.0), 4 * m.uq);
  EXPECT_NEAR(d2, std::log(2.0), 4 * m.uq);
  EXPECT_GT(m.count(NodeClass::DanglingS), 0u);
  EXPECT_GT(m.count(NodeClass::Auxiliary), 0u);
}

TEST(Mesh, RefinementReducesNodeCount) {
  const double rs = std::exp(0.5 * M_PI);
  MeshOptions o;
  o.refinement = Refinement::UniformDyadic;
  auto a = build_stretched(rs, 1.25 * rs, 288, 1.0);
  auto b = build_stretched(rs, 1.25 * rs, 288, 1.0, o);
  EXPECT_LT(b.size(), a.size());
  EXPECT_EQ(a.r_star(), b.r_star());
}

TEST(Mesh, TransitionsAreSeparated) {
  auto m = refined(512, 9.0, 10.0);
  ASSERT_GE(m.transitions.size(), 2u);
  int prev = m.i_star;
  for (std::size_t k = 0; k < m.transitions.size(); ++k) {
    EXPECT_GE(prev - m.transitions[k], 3 << k);
    prev = m.transitions[k];
  }
  EXPECT_GE(m.i_star - m.transitions[0], 3);
  ASSERT_GE(m.pml_transition, 0);
  EXPECT_GE(m.pml_transition - m.i_star, 3);
}

TEST(Mesh, FootprintsResolve) {
  for (auto m : {refined(256, 9.0, 10.0), refined(128), build_regular_polar(3.0, 4.0, 64, 1.0)}) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      const int id = int(k);
      const auto cls = m.nodes[k].cls;
      if (is_dirichlet(cls)) continue;
      const auto kind = grid_stencil_kind(m, id);
      for (int nb : footprint(m, id, kind)) {
        ASSERT_GE(nb, 0) << to_string(cls) << " i=" << m.nodes[k].i << " j=" << m.nodes[k].j;
        const auto c = m.nodes[std::size_t(nb)].cls;
        if (cls == NodeClass::DanglingS && nb != id) {
          EXPECT_TRUE(c == NodeClass::Interior || c == NodeClass::Auxiliary || is_dirichlet(c));
        }
        if (cls == NodeClass::Auxiliary && nb != id) {
          EXPECT_TRUE(c == NodeClass::Interior || is_dirichlet(c));
        }
      }
    }
  }
}

TEST(Mesh, LocalMeshSize) {
  auto m = refined(256, 9.0, 10.0);
  for (std::size_t k = 0; k < m.size(); ++k) {
    const int id = int(k);
    const auto& n = m.nodes[k];
    if (n.cls == NodeClass::Auxiliary) {
      // same as the dangling nodes beside it
      const int d = m.find(n.i + n.factor, n.j);
      ASSERT_GE(d, 0);
      EXPECT_EQ(m.nodes[std::size_t(d)].cls, NodeClass::DanglingS);
      EXPECT_EQ(m.local_h(d), m.local_h(id));
    }
    if (n.cls == NodeClass::Interior && n.i > 0 && n.i < m.i_max) {
      // full compact footprint at local_h, none at half of it
      for (auto& o : reference_offsets(StencilKind::Compact9)) EXPECT_GE(m.neighbor(id, o), 0);
      if (n.factor > 1) {
        bool all = true;
        for (auto& o : reference_offsets(StencilKind::Compact9))
          all = all && m.find(n.i + o[0] * n.factor / 2, n.j + o[1] * n.factor / 2) >= 0;
        EXPECT_FALSE(all) << "i=" << n.i << " j=" << n.j;
      }
    }
  }
  // dangling nodes between the level-1 and level-2 blocks carry the finer size
  const int t = m.transitions[1];
  const int dang = m.find(t, 2);
  ASSERT_GE(dang, 0);
  EXPECT_EQ(m.nodes[std::size_t(dang)].cls, NodeClass::DanglingS);
  EXPECT_EQ(m.local_h(dang), 2 * m.uq);
}

TEST(Mesh, AuxiliaryNodesAtCoarseCellCentres) {
  auto m = refined(128);
  ASSERT_FALSE(m.transitions.empty());
  const int t = m.transitions[0];
  for (std::size_t k = 0; k < m.size(); ++k) {
    const auto& n = m.nodes[k];
    if (n.cls != NodeClass::Auxiliary || n.i > m.i_star) continue;
    EXPECT_EQ(n.i, t - 1);
    // corners of the enclosing coarse cell
    for (int a : {-1, 1})
      for (int b : {-1, 1}) {
        const int c = m.find(n.i + a, n.j + b);
        ASSERT_GE(c, 0);
        EXPECT_EQ(m.nodes[std::size_t(c)].cls, NodeClass::Interior);
      }
  }
}

TEST(Mesh, QuasiUniformCells) {
  // s spans exactly 2 log 2 below the interface
  auto m = refined(256, 4.0, 5.0);
  const double tol = 2.0 * (1.0 + 10.0 * m.h);
  double lo = 1e300, hi = 0.0;
  auto cells = cell_sizes(m);
  for (auto& c : cells)
    if (c.i_hi <= m.i_star) {
      lo = std::min(lo, c.diameter);
      hi = std::max(hi, c.diameter);
    }
  EXPECT_LE(hi / lo, tol);
  for (std::size_t k = 1; k < cells.size(); ++k) {
    const double r = cells[k].diameter / cells[k - 1].diameter;
    EXPECT_LE(std::max(r, 1.0 / r), tol);
  }
}

TEST(Mesh, ThetaPeriodicity) {
  auto m = build_stretched(3.0, 4.0, 32, 1.0);
  const int last = m.find(5, 31), first = m.find(5, 0);
  EXPECT_EQ(m.neighbor(last, {0, 1}), first);
  EXPECT_EQ(m.neighbor(first, {0, -1}), last);
}

TEST(Mesh, RotationPeriodMapsRowsOntoThemselves) {
  auto m = refined(256, 9.0, 10.0);
  const int p = m.rotation_period();
  EXPECT_EQ(m.n_theta % p, 0);
  for (std::size_t k = 0; k < m.size(); ++k) EXPECT_GE(m.find(m.nodes[k].i, m.nodes[k].j + p), 0);
}

TEST(Mesh, QuantumAlignsStudyMeshes) {
  // meshes at N and N/m share r_*, r_M and transitions when the quantum scales with m
  const double rs = std::exp(0.5 * M_PI);
  MeshOptions fine, coarse;
  fine.refinement = coarse.refinement = Refinement::UniformDyadic;
  fine.pml_coarsening = coarse.pml_coarsening = false;
  fine.quantum = 96;
  coarse.quantum = 12;
  auto a = build_stretched(rs, 1.25 * rs, 2304, 1.0, fine);
  auto b = build_stretched(rs, 1.25 * rs, 288, 1.0, coarse);
  EXPECT_EQ(a.i_star, 8 * b.i_star);
  EXPECT_EQ(a.i_max, 8 * b.i_max);
  ASSERT_EQ(a.transitions.size(), b.transitions.size());
  for (std::size_t k = 0; k < a.transitions.size(); ++k) EXPECT_EQ(a.transitions[k], 8 * b.transitions[k]);
}

TEST(Mesh, GeometryErrors) {
  EXPECT_THROW(build_regular_polar(1.0, 2.0, 64, 1.0), Error);
  EXPECT_THROW(build_stretched(0.9, 2.0, 64, 1.0), Error);
  EXPECT_THROW(build_stretched(3.0, 4.0, 4, 1.0), Error);
  MeshOptions o;
  o.refinement = Refinement::AdaptiveNear;
  EXPECT_THROW(build_stretched(3.0, 4.0, 64, 1.0, o), Error);
}

TEST(Mesh, AdaptiveRegionCapsCoarsening) {
  MeshOptions o;
  o.refinement = Refinement::AdaptiveNear;
  o.regions.push_back({0.5, 2.0, 1});
  auto m = build_stretched(9.0, 10.0, 512, 1.0, o);
  auto u = refined(512, 9.0, 10.0);
  EXPECT_LT(m.transitions.size(), u.transitions.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m.radius(int(k)) <= 2.0) {
      EXPECT_LE(m.nodes[k].factor, 2);
    }
  }
}

TEST(Mesh, CsvRowCount) {
  auto m = refined(64);
  std::ostringstream os;
  write_mesh_csv(m, os);
  const std::string s = os.str();
  EXPECT_EQ(std::size_t(std::count(s.begin(), s.end(), '\n')), m.size() + 1);
}
