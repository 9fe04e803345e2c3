#pragma once

// Coefficients of the PML equation in normal form
//   v_qq = a(q) v_tt + b(q) v_q + kt(q) v + ft(q, t)
// for regular polar (q = r) and exponentially stretched (q = s) coordinates.

#include <complex>
#include <functional>
#include <vector>

#include "helmfd/error.hpp"
#include "helmfd/jet.hpp"
#include "helmfd/pml.hpp"

namespace helmfd {

enum class Coords { Regular, Stretched };

inline const char* to_string(Coords c) { return c == Coords::Regular ? "regular" : "stretched"; }

/// Derivative values d^n/dq^n of a, b, kt at one point, n = 0..order.
struct SideCoefficients {
  std::vector<cplx> a, b, kt;
};

namespace detail {

inline Jet differentiate(const Jet& f) {
  Jet d(f.order() - 1);
  for (int k = 0; k < f.order(); ++k) d[k] = double(k + 1) * f[k + 1];
  return d;
}

inline Jet truncate(const Jet& f, int order) {
  Jet g(order);
  for (int k = 0; k <= order; ++k) g[k] = f[k];
  return g;
}

inline std::vector<cplx> derivative_values(const Jet& f) {
  std::vector<cplx> d(std::size_t(f.order()) + 1);
  for (int k = 0; k <= f.order(); ++k) d[std::size_t(k)] = f.derivative(k);
  return d;
}

}  // namespace detail

/// Cartesian source f(x, y) evaluated on jets; an empty function means f = 0.
using SourceFn = std::function<Jet2(const Jet2& x, const Jet2& y)>;

struct PdeModel {
  Coords coords = Coords::Stretched;
  ComplexTransform transform;
  double kappa = 1.0;

  bool in_pml(double q, Side side = Side::Left) const {
    return q > transform.q_star || (q == transform.q_star && side == Side::Right);
  }

  cplx beta() const { return transform.beta(); }

  /// Largest consistency order supported by compact stencils of this form.
  int max_order() const {
    if (coords == Coords::Stretched) return 6;
    return std::abs(beta() - 1.0) == 0.0 ? 4 : 3;
  }

  SideCoefficients coefficients(double q, Side side, int order) const {
    const Jet rho = transform.jet(q, order + 2, side);
    const Jet d1 = detail::differentiate(rho);
    const Jet d2 = detail::differentiate(d1);
    const Jet r1 = detail::truncate(d1, order), r2 = detail::truncate(d2, order), r0 = detail::truncate(rho, order);
    Jet a, b, kt;
    const cplx k2 = kappa * kappa;
    if (coords == Coords::Regular) {
      const Jet s = r1 / r0;
      a = -(s * s);
      b = r2 / r1 - s;
      kt = (r1 * r1) * (-k2);
    } else {
      a = -(r1 * r1);
      b = r2 / r1;
      kt = (r1 * r1) * exp(r0 * cplx(2.0)) * (-k2);
    }
    return {detail::derivative_values(a), detail::derivative_values(b), detail::derivative_values(kt)};
  }

  /// Physical Cartesian position of (q, t) for real q.
  std::pair<double, double> cartesian(double q, double t) const {
    const double r = coords == Coords::Stretched ? std::exp(q) : q;
    return {r * std::cos(t), r * std::sin(t)};
  }

  double physical_r(double q) const { return coords == Coords::Stretched ? std::exp(q) : q; }

  /// Partials d^{i+j} ft / dq^i dt^j at (q, t) for i+j <= order, in Jet2 index
  /// order. The source is assumed to vanish in the layer.
  std::vector<cplx> source_partials(const SourceFn& f, double q, double t, int order) const {
    std::vector<cplx> out(Jet2::size_for(order), 0.0);
    if (!f || in_pml(q)) return out;
    const Jet2 qv = Jet2::variable_x(order, q), tv = Jet2::variable_y(order, t);
    Jet2 r = coords == Coords::Stretched ? exp(qv) : qv;
    const Jet2 x = r * cos(tv), y = r * sin(tv);
    Jet2 ft = f(x, y);
    if (coords == Coords::Stretched) ft = ft * exp(qv * 2.0);
    for (int d = 0; d <= order; ++d)
      for (int i = 0; i <= d; ++i) out[Jet2::index(i, d - i)] = ft.partial(i, d - i);
    return out;
  }
};

}  // namespace helmfd
