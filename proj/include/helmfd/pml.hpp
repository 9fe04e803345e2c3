#pragma once

// Complex coordinate transforms for the circular PML and their parameters.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "helmfd/error.hpp"
#include "helmfd/jet.hpp"

namespace helmfd {

enum class TransformKind { Identity, PolynomialR, QuadraticR, LogR, RationalR, LinearS };

/// Which one-sided limit to take at the interface.
enum class Side { Left, Right };

inline const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Identity: return "identity";
    case TransformKind::PolynomialR: return "polynomial_r";
    case TransformKind::QuadraticR: return "quadratic_r";
    case TransformKind::LogR: return "log_r";
    case TransformKind::RationalR: return "rational_r";
    case TransformKind::LinearS: return "linear_s";
  }
  return "?";
}

inline TransformKind transform_kind_from_string(const std::string& s) {
  for (auto k : {TransformKind::Identity, TransformKind::PolynomialR, TransformKind::QuadraticR, TransformKind::LogR,
                 TransformKind::RationalR, TransformKind::LinearS})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::Config, "unknown transform kind '" + s + "'");
}

struct TransformEval {
  cplx rho, d1, d2;
};

/// The map rho on [0, q_max). For LinearS the coordinate q is s = log r and
/// the physical complex radius is exp(rho(s)); for the other kinds q = r.
struct ComplexTransform {
  TransformKind kind = TransformKind::Identity;
  double q_star = 1.0;
  double q_max = 2.0;
  int n = 2;              // PolynomialR exponent
  double alpha = 0.0;     // PolynomialR, LogR
  double alpha1 = 0.0;    // QuadraticR, RationalR (real part)
  double alpha2 = 0.0;    // RationalR (imaginary part)
  cplx alpha_s = 0.0;     // LinearS slope
  double t = 1.0;         // tuning parameter, kept for provenance

  bool stretched() const { return kind == TransformKind::LinearS; }
  bool singular() const { return kind == TransformKind::LogR || kind == TransformKind::RationalR; }
  double thickness() const { return q_max - q_star; }

  void validate() const {
    if (!(q_max > q_star)) throw Error(ErrorCode::InvalidParameter, "transform needs q_max > q_star");
    if (!stretched() && q_star <= 0.0) throw Error(ErrorCode::InvalidParameter, "r_star must be positive");
    if (kind == TransformKind::PolynomialR && n < 1) throw Error(ErrorCode::InvalidParameter, "polynomial exponent < 1");
  }

  /// rho and its derivatives up to `order` at q, one-sided at q == q_star.
  std::vector<cplx> derivatives(double q, int order, Side side) const {
    std::vector<cplx> d(std::size_t(order) + 1, 0.0);
    d[0] = q;
    if (order >= 1) d[1] = 1.0;
    const bool pml = q > q_star || (q == q_star && side == Side::Right);
    if (!pml || kind == TransformKind::Identity) return d;
    if (q >= q_max && singular()) throw Error(ErrorCode::InvalidParameter, "transform evaluated at or beyond r_max");
    const double x = q - q_star, dd = thickness();
    const cplx i(0, 1);
    switch (kind) {
      case TransformKind::PolynomialR: {
        // i alpha (x/d)^n
        double c = alpha / std::pow(dd, n);
        for (int k = 0; k <= std::min(order, n); ++k) {
          double fall = 1.0;
          for (int m = 0; m < k; ++m) fall *= double(n - m);
          d[std::size_t(k)] += i * c * fall * std::pow(x, n - k);
        }
        break;
      }
      case TransformKind::QuadraticR:
        d[0] += i * alpha1 * x * x;
        if (order >= 1) d[1] += 2.0 * i * alpha1 * x;
        if (order >= 2) d[2] += 2.0 * i * alpha1;
        break;
      case TransformKind::LogR: {
        const double w = q_max - q;
        d[0] += i * alpha * std::log(dd / w);
        double f = 1.0;
        for (int k = 1; k <= order; ++k) {
          if (k > 1) f *= double(k - 1);
          d[std::size_t(k)] += i * alpha * f / std::pow(w, k);
        }
        break;
      }
      case TransformKind::RationalR: {
        const double w = q_max - q;
        const cplx a(alpha1, alpha2);
        d[0] = q_star + a * x / w;
        double f = 1.0;
        for (int k = 1; k <= order; ++k) {
          f *= double(k);
          d[std::size_t(k)] = a * dd * f / std::pow(w, k + 1);
        }
        break;
      }
      case TransformKind::LinearS:
        d[0] = q_star + alpha_s * x;
        if (order >= 1) d[1] = alpha_s;
        break;
      case TransformKind::Identity: break;
    }
    return d;
  }

  Jet jet(double q, int order, Side side) const { return Jet::from_derivatives(derivatives(q, order, side)); }

  TransformEval eval(double q, Side side = Side::Left) const {
    auto d = derivatives(q, 2, side);
    return {d[0], d[1], d[2]};
  }

  /// Interface factor beta = rho'(q_star^+).
  cplx beta() const { return derivatives(q_star, 1, Side::Right)[1]; }

  /// Complex physical radius at q.
  cplx radius(double q, Side side = Side::Left) const {
    cplx r = derivatives(q, 0, side)[0];
    return stretched() ? std::exp(r) : r;
  }

  /// Physical radius of the interface.
  double r_star() const { return stretched() ? std::exp(q_star) : q_star; }
};

/// alpha_1 = 40 kappa^{-1} d^{-2} (1 - r_*^2/r_M^2)^{-1/2}.
inline double auto_alpha1(double kappa, double r_star, double r_max) {
  if (!(r_max > r_star) || r_star <= 0.0) throw Error(ErrorCode::InvalidParameter, "auto_alpha1 needs r_max > r_star > 0");
  const double d = r_max - r_star;
  return 40.0 / (kappa * d * d) / std::sqrt(1.0 - (r_star * r_star) / (r_max * r_max));
}

/// alpha_2 = (t^{-1}/2 log(1 + (40 kappa^{-1} e^{-s_*})^2) + i asin t) / (s_M - s_*).
inline cplx auto_alpha2(double kappa, double s_star, double s_max, double t) {
  if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidParameter, "auto_alpha2 needs t in (0, 1]");
  if (!(s_max > s_star)) throw Error(ErrorCode::InvalidParameter, "auto_alpha2 needs s_max > s_star");
  const double q = 40.0 / kappa * std::exp(-s_star);
  return cplx(0.5 / t * std::log1p(q * q), std::asin(t)) / (s_max - s_star);
}

inline ComplexTransform make_quadratic_r(double kappa, double r_star, double r_max) {
  ComplexTransform tr;
  tr.kind = TransformKind::QuadraticR;
  tr.q_star = r_star;
  tr.q_max = r_max;
  tr.alpha1 = auto_alpha1(kappa, r_star, r_max);
  return tr;
}

inline ComplexTransform make_linear_s(double kappa, double s_star, double s_max, double t = 1.0) {
  ComplexTransform tr;
  tr.kind = TransformKind::LinearS;
  tr.q_star = s_star;
  tr.q_max = s_max;
  tr.t = t;
  tr.alpha_s = auto_alpha2(kappa, s_star, s_max, t);
  return tr;
}

/// exp(-kappa Im z (1 - r_*^2/|z|^2)^{1/2}) at the outer edge of the layer.
inline double decay_budget(const ComplexTransform& tr, double kappa) {
  if (tr.kind == TransformKind::Identity) return 1.0;
  const double q = tr.singular() ? tr.q_max - 1e-9 * tr.thickness() : tr.q_max;
  const cplx z = tr.radius(q, Side::Right);
  const double rs = tr.r_star();
  const double az = std::abs(z);
  const double f = std::sqrt(std::max(0.0, 1.0 - rs * rs / (az * az)));
  return std::exp(-kappa * z.imag() * f);
}

}  // namespace helmfd
