#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "helmfd/assembly.hpp"
#include "helmfd/verify.hpp"

using namespace helmfd;

namespace {

Mesh stretched(int n, int quantum = 1) {
  MeshOptions o;
  o.refinement = Refinement::UniformDyadic;
  o.quantum = quantum;
  return build_stretched(3.0, 4.0, n, 1.0, o);
}

}  // namespace

TEST(Series, TraceMatchesBoundaryRow) {
  const auto s = modal_series(20.0);
  const Mesh m = stretched(64);
  const PdeModel pde = pde_for_mesh(m, 20.0);
  const auto u = series_on_mesh(s, m, pde);
  for (std::size_t k = 0; k < m.size(); ++k)
    if (m.nodes[k].i == 0) {
      EXPECT_LT(std::abs(u[k] - series_trace(s, m.theta(int(k)))), 1e-13);
    }
}

TEST(Series, TailControl) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> rr(1.0, 3.0), th(0.0, 2 * M_PI);
  for (double kappa : {5.0, 20.0}) {
    const auto a = modal_series(kappa, 60), b = modal_series(kappa, 120);
    for (int k = 0; k < 40; ++k) {
      const double r = rr(rng), t = th(rng);
      const cplx ua = series_eval(a, r, t), ub = series_eval(b, r, t);
      EXPECT_LT(std::abs(ua - ub), 1e-14 * std::max(1.0, std::abs(ub)));
    }
  }
}

TEST(Series, SolvesHelmholtz) {
  // five-point Laplacian of the series against -kappa^2 u
  const auto s = modal_series(5.0);
  const double h = 1e-3, x = 1.3, y = 0.7;
  auto u = [&](double a, double b) { return series_eval(s, std::hypot(a, b), std::atan2(b, a)); };
  const cplx lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4.0 * u(x, y)) / (h * h);
  EXPECT_LT(std::abs(lap + 25.0 * u(x, y)), 1e-4 * 25.0 * std::abs(u(x, y)));
}

TEST(Norms, IdenticalAndOffset) {
  const Mesh m = stretched(32);
  std::vector<cplx> v(m.size(), cplx(1.0, 2.0)), w = v;
  auto e = error_norms(m, v, w);
  EXPECT_EQ(e.linf, 0.0);
  EXPECT_EQ(e.l2, 0.0);
  for (auto& x : w) x += cplx(0.3, -0.4);
  e = error_norms(m, v, w);
  EXPECT_NEAR(e.linf, 0.5, 1e-15);
  EXPECT_NEAR(e.l2, 0.5, 1e-15);
  EXPECT_EQ(e.compared, m.unknowns());
}

TEST(Norms, RmsBelowMax) {
  const Mesh m = stretched(32);
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<cplx> v(m.size()), w(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) v[k] = {nd(rng), nd(rng)}, w[k] = {nd(rng), nd(rng)};
    const auto e = error_norms(m, v, w);
    EXPECT_LE(e.l2, e.linf);
  }
}

TEST(Norms, GridReferenceNesting) {
  const Mesh coarse = stretched(96, 2), fine = stretched(192, 4);
  std::size_t matched = 0, total = 0;
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    if (is_dirichlet(coarse.nodes[k].cls)) continue;
    ++total;
    const int r = matching_node(coarse, int(k), fine);
    if (r < 0) continue;
    ++matched;
    EXPECT_NEAR(fine.x(r), coarse.x(int(k)), 1e-12);
    EXPECT_NEAR(fine.y(r), coarse.y(int(k)), 1e-12);
  }
  EXPECT_GE(double(matched), 0.95 * double(total));

  std::vector<cplx> vc(coarse.size(), 1.0), vf(fine.size(), 1.0);
  const auto e = error_norms(coarse, vc, fine, vf);
  EXPECT_EQ(e.linf, 0.0);
  EXPECT_EQ(e.compared + e.unmatched, total);
}

TEST(Norms, MismatchedReferenceRejected) {
  const Mesh a = stretched(96), b = stretched(144);
  std::vector<cplx> va(a.size()), vb(b.size());
  EXPECT_THROW(error_norms(a, va, b, vb), Error);
}

TEST(Orders, FormulaAndTableValues) {
  std::vector<std::pair<double, double>> he;
  for (double h : {0.4, 0.2, 0.1, 0.05}) he.push_back({h, 3.0 * std::pow(h, 4)});
  for (double p : convergence_order(he)) EXPECT_NEAR(p, 4.0, 1e-12);
  EXPECT_NEAR(fitted_order(he), 4.0, 1e-12);

  EXPECT_NEAR(convergence_order({{2.099, 4.432e-1}, {1.574, 1.081e-1}})[0], 4.91, 0.01);
  EXPECT_NEAR(convergence_order({{1.574, 1.877e-3}, {1.049, 1.509e-4}})[0], 6.22, 0.01);
  EXPECT_THROW(convergence_order({{0.1, 1.0}, {0.2, 0.5}}), Error);
  EXPECT_THROW(convergence_order({{0.1, 1.0}}), Error);
}

TEST(Orders, PollutionReduction) {
  EXPECT_EQ(pollution_reduction(0.3, 0.3), 0.0);
  EXPECT_NEAR(pollution_reduction(1.509e-4, 6.109e-2), 0.9975, 5e-5);
  EXPECT_DOUBLE_EQ(pollution_reduction(2.0, 1.0), -1.0);
}

TEST(Decay, SeriesDecaysThroughLayer) {
  const auto s = modal_series(20.0);
  const auto tr = make_linear_s(20.0, std::log(3.0), std::log(4.0));
  for (int k2 : {0, 1, 2}) {
    const auto rep = decay_check(s, tr, 0, k2);
    EXPECT_TRUE(rep.ok) << "k2 " << k2 << " constant " << rep.constant;
    EXPECT_GT(rep.samples.front().measured, 1e3 * rep.samples.back().measured);
  }
  EXPECT_TRUE(decay_check(s, tr, 1, 0).ok);
  EXPECT_THROW(decay_check(s, tr, 2, 0), Error);
}

TEST(Output, FieldAndStudyCsv) {
  const Mesh m = stretched(16);
  std::vector<cplx> v(m.size(), cplx(1.0, -1.0));
  std::ostringstream os;
  write_field_csv(m, v, std::vector<double>(m.size(), 0.0), os);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "node_id,x,y,re_v,im_v,abs_err");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), long(m.size()) + 1);

  std::ostringstream st;
  StudyRow a{0.1, 2.0, 100, 1e-2, 1e-3}, b{0.05, 1.0, 400, 1e-4, 1e-5, 6.6, 6.6, 0.99};
  write_study_csv({a, b}, st);
  EXPECT_EQ(st.str().substr(0, st.str().find('\n')), "h,kappa_h,n_nodes,err_linf,err_l2,order_linf,order_l2,R");
  EXPECT_NE(st.str().find("0.1,2,100,0.01,0.001,,,"), std::string::npos);
}
