#pragma once

// Series solutions, error norms against series or grid references,
// convergence orders and the PML decay check.

#include <cmath>
#include <complex>
#include <map>
#include <ostream>
#include <vector>

#include "helmfd/error.hpp"
#include "helmfd/mesh.hpp"
#include "helmfd/pde.hpp"
#include "helmfd/specfun.hpp"

namespace helmfd {

/// u(rho, theta) = sum_j a_j H_j(kappa rho) / H_j(kappa r0) e^{ij theta}.
struct SeriesSolution {
  double kappa = 1.0;
  double r0 = 1.0;
  int J = 0;
  std::vector<cplx> a;  // a[j + J]

  cplx coeff(int j) const { return std::abs(j) <= J ? a[std::size_t(j + J)] : cplx(0.0); }
};

/// Modal data sum_j j^2 e^{-|j|} e^{ij(j + theta)} on the unit circle.
inline SeriesSolution modal_series(double kappa, int J = 60) {
  SeriesSolution s;
  s.kappa = kappa;
  s.r0 = 1.0;
  s.J = J;
  for (int j = -J; j <= J; ++j) s.a.push_back(double(j) * j * std::exp(-std::abs(j)) * std::polar(1.0, double(j) * j));
  return s;
}

/// Hankel ratios H_j(kappa rho)/H_j(kappa r0), j = 0..J.
inline std::vector<cplx> series_ratios(const SeriesSolution& s, cplx rho) {
  return specfun::hankel1_ratio_sequence(s.kappa * rho, cplx(s.kappa * s.r0), s.J);
}

inline cplx series_eval(const SeriesSolution& s, const std::vector<cplx>& ratios, double theta) {
  cplx u = 0.0;
  // smallest terms first
  for (int j = s.J; j >= 1; --j) {
    const cplx r = ratios[std::size_t(j)];
    u += s.coeff(j) * r * std::polar(1.0, j * theta);
    u += s.coeff(-j) * r * std::polar(1.0, -j * theta);
  }
  return u + s.coeff(0) * ratios[0];
}

inline cplx series_eval(const SeriesSolution& s, cplx rho, double theta) {
  return series_eval(s, series_ratios(s, rho), theta);
}

/// Boundary data of the series on r = r0.
inline cplx series_trace(const SeriesSolution& s, double theta) {
  cplx g = 0.0;
  for (int j = -s.J; j <= s.J; ++j) g += s.coeff(j) * std::polar(1.0, j * theta);
  return g;
}

/// Series at every mesh node, through the complex radius of the transform.
inline std::vector<cplx> series_on_mesh(const SeriesSolution& s, const Mesh& m, const PdeModel& pde) {
  std::vector<cplx> out(m.size(), 0.0);
  std::map<int, std::vector<cplx>> rows;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const int i = m.nodes[k].i;
    auto it = rows.find(i);
    if (it == rows.end()) it = rows.emplace(i, series_ratios(s, pde.transform.radius(m.q_of(i)))).first;
    out[k] = series_eval(s, it->second, m.theta(int(k)));
  }
  return out;
}

struct ErrorNorms {
  double linf = 0.0;
  double l2 = 0.0;  // root mean square over the compared nodes
  std::size_t compared = 0;
  std::size_t unmatched = 0;
};

/// Nodewise comparison against exact values on the same mesh; Dirichlet nodes are skipped.
inline ErrorNorms error_norms(const Mesh& m, const std::vector<cplx>& v, const std::vector<cplx>& exact) {
  ErrorNorms e;
  double s2 = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (is_dirichlet(m.nodes[k].cls)) continue;
    const double d = std::abs(v[k] - exact[k]);
    e.linf = std::max(e.linf, d);
    s2 += d * d;
    ++e.compared;
  }
  if (e.compared) e.l2 = std::sqrt(s2 / double(e.compared));
  return e;
}

/// Fine-mesh node matching a coarse node by lattice indices, -1 if absent.
inline int matching_node(const Mesh& coarse, int id, const Mesh& fine) {
  const int scale = fine.n_theta / coarse.n_theta;
  const auto& n = coarse.nodes[std::size_t(id)];
  return fine.find(n.i * scale, n.j * scale);
}

/// Comparison with a grid reference. Lattices must be nested: same origin,
/// theta counts in integer ratio. Unmatched coarse nodes are excluded and counted.
inline ErrorNorms error_norms(const Mesh& m, const std::vector<cplx>& v, const Mesh& ref,
                              const std::vector<cplx>& vref) {
  if (ref.n_theta % m.n_theta != 0 || ref.coords != m.coords)
    throw Error(ErrorCode::ReferenceMismatch, "reference lattice is not a refinement of the mesh");
  const int scale = ref.n_theta / m.n_theta;
  if (std::abs(ref.q0 - m.q0) > 1e-12 * std::max(1.0, std::abs(m.q0)) ||
      std::abs(ref.uq * scale - m.uq) > 1e-12 * m.uq)
    throw Error(ErrorCode::ReferenceMismatch, "reference lattice origin or spacing differs");
  ErrorNorms e;
  double s2 = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (is_dirichlet(m.nodes[k].cls)) continue;
    const int r = matching_node(m, int(k), ref);
    if (r < 0 || is_dirichlet(ref.nodes[std::size_t(r)].cls)) {
      ++e.unmatched;
      continue;
    }
    const double d = std::abs(v[k] - vref[std::size_t(r)]);
    e.linf = std::max(e.linf, d);
    s2 += d * d;
    ++e.compared;
  }
  if (e.compared == 0) throw Error(ErrorCode::ReferenceMismatch, "no common nodes with the reference");
  e.l2 = std::sqrt(s2 / double(e.compared));
  return e;
}

/// log(e_prev / e) / log(h_prev / h) for successive entries.
inline std::vector<double> convergence_order(const std::vector<std::pair<double, double>>& he) {
  if (he.size() < 2) throw Error(ErrorCode::InvalidParameter, "convergence order needs two entries");
  std::vector<double> out;
  for (std::size_t k = 1; k < he.size(); ++k) {
    if (!(he[k].first < he[k - 1].first)) throw Error(ErrorCode::InvalidParameter, "mesh sizes must decrease");
    out.push_back(std::log(he[k - 1].second / he[k].second) / std::log(he[k - 1].first / he[k].first));
  }
  return out;
}

/// Least-squares slope of log e against log h.
inline double fitted_order(const std::vector<std::pair<double, double>>& he) {
  if (he.size() < 2) throw Error(ErrorCode::InvalidParameter, "fitted order needs two entries");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(he.size());
  for (auto& [h, e] : he) {
    const double x = std::log(h), y = std::log(e);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// R = 1 - e_min / e_generic.
inline double pollution_reduction(double e_minimized, double e_generic) { return 1.0 - e_minimized / e_generic; }

struct DecaySample {
  double r = 0.0;
  cplx z;
  double measured = 0.0;
  double bound = 0.0;  // exp(-kappa Im z sqrt(1 - r_*^2/|z|^2)) (kappa^k1 + |z|^-k1) |g|_{H^|k|}
};

struct DecayReport {
  std::vector<DecaySample> samples;
  double constant = 0.0;  // smallest C with measured <= C bound at every sample
  bool ok = true;
};

/// L2(T) norms of d_z^k1 d_theta^k2 u(z, .) along z = rho(r), r in [r_*, r_M],
/// compared with the decay bound. Flags the report when the fitted constant exceeds c_max.
inline DecayReport decay_check(const SeriesSolution& s, const ComplexTransform& tr, int k1, int k2,
                               int samples = 16, double c_max = 10.0) {
  if (k1 < 0 || k1 > 1 || k2 < 0) throw Error(ErrorCode::InvalidParameter, "decay check supports k1 in {0, 1}");
  const double two_pi = 2.0 * M_PI;
  const int k = k1 + k2;
  double gnorm = 0.0;
  for (int j = -s.J; j <= s.J; ++j) gnorm += std::pow(1.0 + double(j) * j, k) * std::norm(s.coeff(j));
  gnorm = std::sqrt(two_pi * gnorm);
  DecayReport rep;
  const double rs = tr.r_star();
  for (int n = 0; n < samples; ++n) {
    const double q = tr.q_star + (tr.q_max - tr.q_star) * n / std::max(1, samples - 1);
    DecaySample d;
    d.r = tr.stretched() ? std::exp(q) : q;
    d.z = tr.radius(q, n == 0 ? Side::Left : Side::Right);
    const cplx kz = s.kappa * d.z, k0 = s.kappa * s.r0;
    double acc = 0.0;
    for (int j = -s.J; j <= s.J; ++j) {
      const cplx c = s.coeff(j);
      if (c == cplx(0.0)) continue;
      cplx t = (k1 == 0 ? specfun::hankel1(j, kz) : s.kappa * specfun::hankel1_deriv(j, 1, kz)) / specfun::hankel1(j, k0);
      acc += std::norm(c * t) * std::pow(double(j) * j, k2);
    }
    d.measured = std::sqrt(two_pi * acc);
    const double az = std::abs(d.z);
    const double f = std::sqrt(std::max(0.0, 1.0 - rs * rs / (az * az)));
    d.bound = std::exp(-s.kappa * d.z.imag() * f) * (std::pow(s.kappa, k1) + std::pow(az, -k1)) * gnorm;
    if (d.bound > 0.0) rep.constant = std::max(rep.constant, d.measured / d.bound);
    rep.samples.push_back(d);
  }
  rep.ok = rep.constant <= c_max;
  return rep;
}

/// Per-node field output.
inline void write_field_csv(const Mesh& m, const std::vector<cplx>& v, const std::vector<double>& abs_err,
                            std::ostream& os) {
  os.precision(17);
  os << "node_id,x,y,re_v,im_v,abs_err\n";
  for (std::size_t k = 0; k < m.size(); ++k) {
    os << k << ',' << m.x(int(k)) << ',' << m.y(int(k)) << ',' << v[k].real() << ',' << v[k].imag() << ',';
    if (k < abs_err.size() && abs_err[k] >= 0.0)
      os << abs_err[k];
    os << '\n';
  }
}

struct StudyRow {
  double h = 0.0, kappa_h = 0.0;
  std::size_t n_nodes = 0;
  double err_linf = 0.0, err_l2 = 0.0;
  double order_linf = NAN, order_l2 = NAN;
  double R = NAN;
};

inline void write_study_csv(const std::vector<StudyRow>& rows, std::ostream& os) {
  os.precision(10);
  os << "h,kappa_h,n_nodes,err_linf,err_l2,order_linf,order_l2,R\n";
  auto opt = [&](double x) {
    if (!std::isnan(x)) os << x;
  };
  for (auto& r : rows) {
    os << r.h << ',' << r.kappa_h << ',' << r.n_nodes << ',' << r.err_linf << ',' << r.err_l2 << ',';
    opt(r.order_linf);
    os << ',';
    opt(r.order_l2);
    os << ',';
    opt(r.R);
    os << '\n';
  }
}

}  // namespace helmfd
