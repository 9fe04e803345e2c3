#pragma once

// Integer-order Bessel J_n and Hankel H^(1)_n of complex argument.

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "helmfd/error.hpp"

namespace helmfd::specfun {

using cplx = std::complex<double>;

namespace detail {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = 1e-17;

inline void require_finite(cplx z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw Error(ErrorCode::NonFinite, "Bessel argument is not finite");
}

inline double sign_of_order(int n) { return (n % 2 == 0) ? 1.0 : -1.0; }

// Terms decrease monotonically once |z|^2/4 <= n+1, so the alternating
// series does not cancel.
inline bool series_is_safe(int n, double az) { return az <= 2.0 || az * az <= 4.0 * (n + 1); }

// Power series for J_n, n >= 0.
inline cplx j_series(int n, cplx z) {
  if (z == cplx(0.0)) return n == 0 ? 1.0 : 0.0;
  cplx term = (n == 0) ? cplx(1.0) : std::exp(double(n) * std::log(0.5 * z) - std::lgamma(n + 1.0));
  const cplx q = -0.25 * z * z;
  cplx sum = term;
  for (int k = 1; k < 500; ++k) {
    term *= q / (double(k) * double(n + k));
    sum += term;
    if (std::abs(term) <= kEps * std::abs(sum)) break;
  }
  return sum;
}

// Miller backward recurrence for J_0..J_nmax with Im z >= 0, normalised by
// exp(-iz) = J_0 + 2 sum_k (-i)^k J_k, which avoids cancellation in the
// upper half plane.
inline std::vector<cplx> j_miller_upper(cplx z, int nmax) {
  const double az = std::abs(z);
  const double top = std::max<double>(nmax, az);
  const int start = int(std::ceil(top + 10.0 * std::cbrt(top) + 30.0));
  std::vector<cplx> f(std::size_t(nmax) + 1, 0.0);
  cplx fp1 = 0.0, fk = 1e-30, acc = 0.0;
  const cplx two_over_z = 2.0 / z;
  // (-i)^k cycles with period four.
  const cplx phase[4] = {1.0, cplx(0, -1), -1.0, cplx(0, 1)};
  for (int k = start; k >= 0; --k) {
    if (k <= nmax) f[std::size_t(k)] = fk;
    if (k >= 1) acc += phase[k % 4] * fk;
    if (k == 0) break;
    cplx fm1 = double(k) * two_over_z * fk - fp1;
    fp1 = fk;
    fk = fm1;
    if (std::abs(fk) > 1e250) {
      const double s = 1e-250;
      fk *= s;
      fp1 *= s;
      acc *= s;
      for (int i = k - 1; i <= nmax; ++i)
        if (i >= 0) f[std::size_t(i)] *= s;
    }
  }
  const cplx norm = std::exp(cplx(0, -1) * z) / (f[0] + 2.0 * acc);
  for (auto& v : f) v *= norm;
  return f;
}

inline std::vector<cplx> j_sequence(cplx z, int nmax) {
  if (z == cplx(0.0)) {
    std::vector<cplx> f(std::size_t(nmax) + 1, 0.0);
    f[0] = 1.0;
    return f;
  }
  std::vector<cplx> f;
  if (z.imag() >= 0.0) {
    f = j_miller_upper(z, nmax);
  } else {
    f = j_miller_upper(std::conj(z), nmax);
    for (auto& v : f) v = std::conj(v);
  }
  if (z.imag() == 0.0)
    for (auto& v : f) v = v.real();
  return f;
}

// Y_0, Y_1 by their ascending series, used for |z| < 2.
inline std::pair<cplx, cplx> y01_series(cplx z) {
  const double g = std::numbers::egamma;
  const cplx lz = std::log(0.5 * z);
  const cplx q = -0.25 * z * z;
  const cplx j0 = j_series(0, z), j1 = j_series(1, z);
  cplx y0sum = 0.0, term = 1.0;
  double hk = 0.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / double(k * k);
    hk += 1.0 / k;
    cplx t = -hk * term;
    y0sum += t;
    if (std::abs(t) <= kEps * (std::abs(y0sum) + 1e-300)) break;
  }
  const cplx y0 = (2.0 / kPi) * ((lz + g) * j0 + y0sum);
  // psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
  cplx y1sum = 0.0;
  term = 0.5 * z;
  hk = 0.0;
  for (int k = 0; k < 200; ++k) {
    if (k > 0) {
      term *= q / double(k * (k + 1));
      hk += 1.0 / k;
    }
    const double psi = 2.0 * hk + 1.0 / (k + 1) - 2.0 * g;
    cplx t = psi * term;
    y1sum += t;
    if (k > 2 && std::abs(t) <= kEps * (std::abs(y1sum) + 1e-300)) break;
  }
  const cplx y1 = -2.0 / (kPi * z) + (2.0 / kPi) * lz * j1 - y1sum / kPi;
  return {y0, y1};
}

// Hankel asymptotic expansion, for |z| >= 25 in the closed upper half plane.
inline cplx h_asymptotic(int nu, cplx z) {
  const double mu = 4.0 * nu * nu;
  cplx sum = 1.0, term = 1.0;
  double last = 1.0;
  const cplx iz = cplx(0, 1) / z;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (8.0 * k) * iz;
    const double at = std::abs(term);
    if (at > last) break;
    sum += term;
    last = at;
    if (at < kEps) break;
  }
  const cplx phase = std::exp(cplx(0, 1) * (z - (0.5 * nu + 0.25) * kPi));
  return std::sqrt(2.0 / (kPi * z)) * phase * sum;
}

// Steed's continued fraction for H_0'/H_0 (modified Lentz).
inline cplx h0_log_derivative(cplx z) {
  const cplx i(0, 1);
  const double tiny = 1e-300;
  cplx f = tiny, c = f, d = 0.0;
  for (int k = 1; k < 20000; ++k) {
    const double aa = (k - 0.5) * (k - 0.5);
    const cplx b = 2.0 * (z + double(k) * i);
    d = b + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = b + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const cplx delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return -0.5 / z + i + (i / z) * f;
}

// H_0 and H_1 for Im z >= 0.
inline std::pair<cplx, cplx> h01_upper(cplx z) {
  const double az = std::abs(z);
  if (az >= 25.0) return {h_asymptotic(0, z), h_asymptotic(1, z)};
  if (az < 2.0) {
    auto [y0, y1] = y01_series(z);
    const cplx i(0, 1);
    return {j_series(0, z) + i * y0, j_series(1, z) + i * y1};
  }
  const auto j = j_sequence(z, 1);
  const cplx r = h0_log_derivative(z);
  const cplx h0 = (2.0 * cplx(0, 1) / (kPi * z)) / (j[0] * r + j[1]);
  return {h0, -r * h0};
}

inline std::pair<cplx, cplx> h01(cplx z) {
  if (z.imag() >= 0.0) return h01_upper(z);
  // H1(z) = conj(2 J(conj z) - H1(conj z))
  const cplx w = std::conj(z);
  auto [a0, a1] = h01_upper(w);
  const auto j = j_sequence(w, 1);
  return {std::conj(2.0 * j[0] - a0), std::conj(2.0 * j[1] - a1)};
}

}  // namespace detail

/// J_n(z) for integer n.
inline cplx bessel_j(int n, cplx z) {
  detail::require_finite(z);
  const double sgn = (n < 0) ? detail::sign_of_order(n) : 1.0;
  const int m = std::abs(n);
  if (detail::series_is_safe(m, std::abs(z))) return sgn * detail::j_series(m, z);
  return sgn * detail::j_sequence(z, m)[std::size_t(m)];
}

/// J_0..J_nmax at a single argument.
inline std::vector<cplx> bessel_j_sequence(cplx z, int nmax) {
  detail::require_finite(z);
  if (nmax < 0) throw Error(ErrorCode::InvalidParameter, "negative order bound");
  return detail::j_sequence(z, nmax);
}

/// H^(1)_0..H^(1)_nmax by forward recurrence. May overflow for nmax >> |z|.
inline std::vector<cplx> hankel1_sequence(cplx z, int nmax) {
  detail::require_finite(z);
  if (z == cplx(0.0)) throw Error(ErrorCode::NonFinite, "Hankel function at zero");
  std::vector<cplx> h(std::size_t(std::max(nmax, 1)) + 1);
  auto [h0, h1] = detail::h01(z);
  h[0] = h0;
  h[1] = h1;
  for (int k = 1; k < nmax; ++k) h[std::size_t(k) + 1] = (2.0 * k / z) * h[std::size_t(k)] - h[std::size_t(k) - 1];
  h.resize(std::size_t(nmax) + 1);
  return h;
}

/// H^(1)_n(z) for integer n, using H_{-n} = (-1)^n H_n.
inline cplx hankel1(int n, cplx z) {
  const int m = std::abs(n);
  const double sgn = (n < 0) ? detail::sign_of_order(n) : 1.0;
  return sgn * hankel1_sequence(z, m)[std::size_t(m)];
}

/// H_j(z)/H_j(z0) for j = 0..nmax, computed through ratios so that the
/// individual Hankel values never need to be formed at large order.
inline std::vector<cplx> hankel1_ratio_sequence(cplx z, cplx z0, int nmax) {
  detail::require_finite(z);
  detail::require_finite(z0);
  std::vector<cplx> out(std::size_t(nmax) + 1);
  auto [a0, a1] = detail::h01(z);
  auto [b0, b1] = detail::h01(z0);
  out[0] = a0 / b0;
  cplx ra = a1 / a0, rb = b1 / b0;
  for (int k = 1; k <= nmax; ++k) {
    out[std::size_t(k)] = out[std::size_t(k) - 1] * (ra / rb);
    ra = 2.0 * k / z - 1.0 / ra;
    rb = 2.0 * k / z0 - 1.0 / rb;
  }
  return out;
}

namespace detail {

// d^m/dz^m F_n as a sum of c * z^{-p} * F_k using F_k' = F_{k-1} - (k/z) F_k.
inline std::map<std::pair<int, int>, double> derivative_terms(int n, int m) {
  std::map<std::pair<int, int>, double> t{{{n, 0}, 1.0}};
  for (int step = 0; step < m; ++step) {
    std::map<std::pair<int, int>, double> next;
    for (auto [key, c] : t) {
      auto [k, p] = key;
      if (p > 0) next[{k, p + 1}] += -double(p) * c;
      next[{k - 1, p}] += c;
      if (k != 0) next[{k, p + 1}] += -double(k) * c;
    }
    t = std::move(next);
  }
  return t;
}

template <class Eval>
cplx eval_derivative(int n, int m, cplx z, Eval&& f) {
  cplx sum = 0.0;
  for (auto [key, c] : derivative_terms(n, m)) {
    if (c == 0.0) continue;
    auto [k, p] = key;
    sum += c * std::pow(z, -p) * f(k);
  }
  return sum;
}

}  // namespace detail

/// m-th derivative of J_n.
inline cplx bessel_j_deriv(int n, int m, cplx z) {
  return detail::eval_derivative(n, m, z, [&](int k) { return bessel_j(k, z); });
}

/// m-th derivative of H^(1)_n.
inline cplx hankel1_deriv(int n, int m, cplx z) {
  return detail::eval_derivative(n, m, z, [&](int k) { return hankel1(k, z); });
}

}  // namespace helmfd::specfun
