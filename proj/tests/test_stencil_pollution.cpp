#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "helmfd/stencil_pollution.hpp"

using namespace helmfd;
using specfun::bessel_j;
using specfun::hankel1;

namespace {

const cplx I(0, 1);

PdeModel stretched20() { return PdeModel{Coords::Stretched, make_linear_s(20.0, std::log(3.0), std::log(4.0)), 20.0}; }
PdeModel regular20() { return PdeModel{Coords::Regular, make_quadratic_r(20.0, 3.0, 4.0), 20.0}; }

// Hankel modes H_n(kappa r) e^{in t}, normalised at r = r0, at the stencil points.
std::vector<cplx> hankel_mode(const PdeModel& m, const Stencil& s, int n, double t0) {
  std::vector<cplx> v;
  const double r0 = m.physical_r(s.q);
  for (auto& p : s.points) {
    const double q = s.q + p.x1 * s.h, t = t0 + p.x2 * s.h;
    v.push_back(hankel1(n, m.kappa * m.physical_r(q)) / hankel1(n, m.kappa * r0) * std::polar(1.0, n * t));
  }
  return v;
}

double mode_truncation(const PdeModel& m, const Stencil& s) {
  double e = 0.0;
  for (int n : {0, 3, 10, 25, 40}) e = std::max(e, abs(local_truncation(s, hankel_mode(m, s, n, 0.3), {})));
  return e;
}

Stencil stencil_at(const PdeModel& m, double kh, bool pollution) {
  const double r = 2.0, q = m.coords == Coords::Stretched ? std::log(r) : r;
  const double h = m.coords == Coords::Stretched ? kh / (m.kappa * r) : kh / m.kappa;
  MinimizeOptions o;
  o.gate = 0.0;
  o.pollution = pollution;
  return minimized_stencil(m, StencilKind::Compact9, q, h, to_points(reference_offsets(StencilKind::Compact9)),
                           m.max_order(), o);
}

}  // namespace

TEST(TestFunctions, CentreModesInRegularRegion) {
  std::vector<ModePoint> pts{{2.0, 0.0}, {2.1, 0.05}};
  auto m = test_function_modes(TestRegion::Regular, 20.0, 3.0, pts);
  for (int j = -m.J; j <= m.J; j += 7) {
    EXPECT_NEAR(abs(m.B(m.J + j, 0) - bessel_j(j, 40.0)), 0.0, 1e-13);
    EXPECT_NEAR(abs(m.B(m.J + j, 1) - bessel_j(j, 42.0) * std::polar(1.0, 0.05 * j)), 0.0, 1e-13);
  }
}

TEST(TestFunctions, LayerModesUseScaledHankelRatio) {
  const cplx z = cplx(3.2, 0.4);
  std::vector<ModePoint> pts{{z, 0.1}};
  auto m = test_function_modes(TestRegion::Layer, 20.0, 3.0, pts);
  for (int j : {0, 1, 5, 30, 55}) {
    const cplx want = bessel_j(j, 60.0) * hankel1(j, 20.0 * z) / hankel1(j, 60.0) * std::polar(1.0, 0.1 * j);
    EXPECT_NEAR(abs(m.B(m.J + j, 0) - want), 0.0, 1e-10 * abs(want) + 1e-300);
    EXPECT_NEAR(abs(m.B(m.J - j, 0) - std::pow(-1.0, j) * want * std::polar(1.0, -0.2 * j)), 0.0, 1e-10 * abs(want));
  }
}

TEST(TestFunctions, SuperExponentialDecayInOrder) {
  // kappa = 20, r = 3, kappa r_M = 80
  std::vector<ModePoint> pts{{3.0, 0.0}};
  auto m = test_function_modes(TestRegion::Regular, 20.0, 3.0, pts);
  EXPECT_GT(m.J, 60);
  // band criterion is on squared magnitudes
  EXPECT_LT(std::norm(m.B(0, 0)), 1e-18 * m.B.col(0).squaredNorm());
  auto wide = detail::mode_matrix(TestRegion::Regular, 20.0, 3.0, pts, 200);
  const double mx = wide.cwiseAbs().maxCoeff();
  for (int j = 160; j <= 200; j += 10) EXPECT_LT(std::abs(wide(200 + j, 0)), 1e-18 * mx) << j;
  for (int j = 70; j < 200; ++j) EXPECT_LT(std::abs(wide(200 + j + 1, 0)), std::abs(wide(200 + j, 0)));
}

TEST(TestFunctions, PlaneWaveExpansionIdentity) {
  const double kappa = 20.0;
  for (double r = 1.0; r <= 3.0 + 1e-12; r += 0.25) {
    auto m = test_function_modes(TestRegion::Regular, kappa, 3.0, {{r, 0.0}});
    double worst = 0.0;
    for (int k = 0; k < 64; ++k) {
      const double t = 2.0 * M_PI * k / 64;
      cplx s = 0.0;
      for (int j = -m.J; j <= m.J; ++j) s += std::pow(I, j) * m.B(m.J + j, 0) * std::polar(1.0, j * t);
      worst = std::max(worst, abs(s - std::exp(I * kappa * r * std::cos(t))));
    }
    EXPECT_LE(worst, 1e-10) << "r=" << r;
  }
}

TEST(Gram, SingleModeHasRankOne) {
  ModeMatrix m;
  m.J = 0;
  m.B = Eigen::MatrixXcd::Random(1, 9);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(gram(m, 0.0));
  EXPECT_EQ((svd.singularValues().array() > 1e-12 * svd.singularValues()[0]).count(), 1);
}

TEST(Gram, HermitianWithShiftedSpectrum) {
  auto pde = stretched20();
  const double q = std::log(2.0), h = 0.01;
  auto pts = to_points(reference_offsets(StencilKind::Compact9));
  auto m = test_function_modes(TestRegion::Regular, 20.0, 3.0, grid_mode_points(pde, q, h, pts));
  const double delta = 1e-6;
  auto W = gram(m, delta);
  EXPECT_LE((W - W.adjoint()).cwiseAbs().maxCoeff(), 1e-14 * W.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W);
  EXPECT_GE(es.eigenvalues()[0], delta * (1 - 1e-6));
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    EXPECT_EQ(W(i, i).imag(), 0.0);
    EXPECT_GE(W(i, i).real(), delta);
  }
}

TEST(Minimize, OptimalAgainstPerturbationsAndGeneric) {
  auto pde = stretched20();
  const double q = std::log(2.0), h = 0.5 / 40.0;
  auto pts = to_points(reference_offsets(StencilKind::Compact9));
  auto m = test_function_modes(TestRegion::Regular, 20.0, 3.0, grid_mode_points(pde, q, h, pts));
  for (double delta : {0.0, 1e-14, 1e-12}) {
    Eigen::VectorXcd a = minimize(m, delta);
    EXPECT_EQ(a[0], cplx(1.0));
    const double best = objective(m, a, delta);
    std::mt19937 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXcd e(a.size());
      e[0] = 0.0;
      for (Eigen::Index i = 1; i < e.size(); ++i) e[i] = cplx(n(rng), n(rng));
      EXPECT_GE(objective(m, a + 1e-4 * e / e.norm(), delta), best);
    }
    auto g = generic_stencil(pde, StencilKind::Compact9, q, h, pts, 6);
    Eigen::VectorXcd c = Eigen::Map<Eigen::VectorXcd>(g.coeffs.data(), Eigen::Index(g.coeffs.size()));
    EXPECT_LE(best, objective(m, c, delta));
  }
}

TEST(Minimize, StretchedInteriorLimitPattern) {
  const double w[9] = {1, -0.05, -0.2, -0.05, -0.2, -0.2, -0.05, -0.2, -0.05};
  auto dev = [&](double kh) {
    auto s = stencil_at(stretched20(), kh, true);
    double d = 0.0;
    for (int i = 0; i < 9; ++i) d += std::norm(s.coeffs[std::size_t(i)] - w[i]);
    return std::sqrt(d);
  };
  const double d1 = dev(0.2), d2 = dev(0.1), d3 = dev(0.05);
  EXPECT_LE(d1, 0.1);
  EXPECT_LT(d2, d1);
  EXPECT_LT(d3, d2);
}

TEST(Minimize, ReducesTruncationOnHankelModes) {
  for (auto pde : {stretched20(), regular20()}) {
    const double em = mode_truncation(pde, stencil_at(pde, 0.5, true));
    const double eg = mode_truncation(pde, stencil_at(pde, 0.5, false));
    EXPECT_LE(em / eg, 0.1) << to_string(pde.coords);
  }
}

TEST(Minimize, ConsistencyOrderOnHankelModes) {
  for (auto pde : {stretched20(), regular20()}) {
    const int M = pde.max_order();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double kh : {0.8, 0.4, 0.2}) {
      const double e = mode_truncation(pde, stencil_at(pde, kh, true));
      ASSERT_GT(e, 1e-7 * 1e-6);
      const double x = std::log(kh), y = std::log(e);
      sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
    }
    EXPECT_GE((n * sxy - sx * sy) / (n * sxx - sx * sx), M + 1.5) << to_string(pde.coords);
  }
}

TEST(Minimize, SameRadiusGivesIdenticalCoefficients) {
  auto a = stencil_at(stretched20(), 0.5, true), b = stencil_at(stretched20(), 0.5, true);
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) EXPECT_EQ(a.coeffs[i], b.coeffs[i]);
}

TEST(Minimize, LayerStencilsAreRegularised) {
  auto pde = stretched20();
  const double q = pde.transform.q_star + 0.3 * pde.transform.thickness();
  auto pts = to_points(reference_offsets(StencilKind::PmlInterior11));
  auto s = minimized_stencil(pde, StencilKind::PmlInterior11, q, 0.5 / 60.0, pts, 6);
  EXPECT_TRUE(s.minimized);
  EXPECT_GE(s.delta, 1e-14);
  EXPECT_GE(s.min_eig, s.delta * (1 - 1e-6));
  auto o = minimized_stencil(pde, StencilKind::Compact9, std::log(2.0), 0.5 / 40.0,
                             to_points(reference_offsets(StencilKind::Compact9)), 6);
  EXPECT_EQ(o.delta, 0.0);
}

TEST(DeltaPolicy, Rules) {
  EXPECT_EQ(delta_policy(false, true, 1e-3), 0.0);
  EXPECT_DOUBLE_EQ(delta_policy(false, false, 1e-10), 1e-12);
  EXPECT_DOUBLE_EQ(delta_policy(false, false, 1e-16), 1e-14);
  EXPECT_DOUBLE_EQ(delta_policy(true, true, 1e-16), 1e-14);
  EXPECT_DOUBLE_EQ(delta_policy(true, true, 1e-6), 1e-8);
}

TEST(FallbackGate, Threshold) {
  EXPECT_TRUE(generic_fallback_gate(20.0, 0.005, false));
  EXPECT_FALSE(generic_fallback_gate(20.0, 0.025, false));
  EXPECT_FALSE(generic_fallback_gate(20.0, 0.005, true));
  EXPECT_FALSE(generic_fallback_gate(20.0, 0.0075, false));
  EXPECT_TRUE(generic_fallback_gate(20.0, 0.0074, false));
  // gated stencils come back unminimised
  auto pde = stretched20();
  auto s = minimized_stencil(pde, StencilKind::Compact9, std::log(2.0), 0.1 / 40.0,
                             to_points(reference_offsets(StencilKind::Compact9)), 6);
  EXPECT_FALSE(s.minimized);
}
