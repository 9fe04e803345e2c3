#pragma once

// Truncated Taylor series in one and two variables (forward-mode jets).
// Coefficients are stored as f^(k)/k!, never as raw derivatives.

#include <cassert>
#include <cmath>
#include <complex>
#include <vector>

namespace helmfd {

using cplx = std::complex<double>;

/// Univariate jet of fixed order.
class Jet {
 public:
  Jet() = default;
  explicit Jet(int order, cplx c0 = 0.0) : t_(std::size_t(order) + 1, 0.0) { t_[0] = c0; }

  static Jet variable(int order, cplx x0) {
    Jet j(order, x0);
    if (order >= 1) j.t_[1] = 1.0;
    return j;
  }
  /// Build from derivative values d[k] = f^(k)(x0).
  static Jet from_derivatives(const std::vector<cplx>& d) {
    Jet j(int(d.size()) - 1);
    double fact = 1.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (k > 0) fact *= double(k);
      j.t_[k] = d[k] / fact;
    }
    return j;
  }

  int order() const { return int(t_.size()) - 1; }
  cplx operator[](int k) const { return t_[std::size_t(k)]; }
  cplx& operator[](int k) { return t_[std::size_t(k)]; }
  cplx value() const { return t_[0]; }

  /// k-th derivative at the expansion point.
  cplx derivative(int k) const {
    double fact = 1.0;
    for (int i = 2; i <= k; ++i) fact *= i;
    return t_[std::size_t(k)] * fact;
  }

  Jet& operator+=(const Jet& o) {
    for (std::size_t k = 0; k < t_.size(); ++k) t_[k] += o.t_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t k = 0; k < t_.size(); ++k) t_[k] -= o.t_[k];
    return *this;
  }
  Jet& operator*=(cplx s) {
    for (auto& c : t_) c *= s;
    return *this;
  }
  Jet& operator+=(cplx s) {
    t_[0] += s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, cplx s) { return a *= s; }
  friend Jet operator*(cplx s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, cplx s) { return a += s; }
  friend Jet operator-(const Jet& a) { return a * cplx(-1.0); }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet c(a.order());
    for (int i = 0; i <= a.order(); ++i)
      for (int j = 0; i + j <= a.order(); ++j) c.t_[std::size_t(i + j)] += a.t_[std::size_t(i)] * b.t_[std::size_t(j)];
    return c;
  }

  friend Jet operator/(const Jet& a, const Jet& b) {
    // c = a/b  <=>  c_k = (a_k - sum_{i<k} c_i b_{k-i}) / b_0
    Jet c(a.order());
    for (int k = 0; k <= a.order(); ++k) {
      cplx s = a.t_[std::size_t(k)];
      for (int i = 0; i < k; ++i) s -= c.t_[std::size_t(i)] * b.t_[std::size_t(k - i)];
      c.t_[std::size_t(k)] = s / b.t_[0];
    }
    return c;
  }

 private:
  std::vector<cplx> t_;
};

/// Bivariate jet, total degree <= order, in variables (x, y).
class Jet2 {
 public:
  Jet2() = default;
  explicit Jet2(int order, cplx c0 = 0.0) : n_(order), t_(size_for(order), 0.0) { t_[0] = c0; }

  static Jet2 variable_x(int order, cplx x0) {
    Jet2 j(order, x0);
    if (order >= 1) j(1, 0) = 1.0;
    return j;
  }
  static Jet2 variable_y(int order, cplx y0) {
    Jet2 j(order, y0);
    if (order >= 1) j(0, 1) = 1.0;
    return j;
  }

  static std::size_t size_for(int order) { return std::size_t((order + 1) * (order + 2) / 2); }
  static std::size_t index(int i, int j) { return std::size_t((i + j) * (i + j + 1) / 2 + j); }

  int order() const { return n_; }
  cplx operator()(int i, int j) const { return t_[index(i, j)]; }
  cplx& operator()(int i, int j) { return t_[index(i, j)]; }
  cplx value() const { return t_[0]; }

  /// Partial derivative d^{i+j}/dx^i dy^j at the expansion point.
  cplx partial(int i, int j) const {
    double f = 1.0;
    for (int k = 2; k <= i; ++k) f *= k;
    for (int k = 2; k <= j; ++k) f *= k;
    return t_[index(i, j)] * f;
  }

  bool is_zero() const {
    for (auto& c : t_)
      if (c != cplx(0.0)) return false;
    return true;
  }

  Jet2& operator+=(const Jet2& o) {
    for (std::size_t k = 0; k < t_.size(); ++k) t_[k] += o.t_[k];
    return *this;
  }
  Jet2& operator-=(const Jet2& o) {
    for (std::size_t k = 0; k < t_.size(); ++k) t_[k] -= o.t_[k];
    return *this;
  }
  Jet2& operator*=(cplx s) {
    for (auto& c : t_) c *= s;
    return *this;
  }
  Jet2& operator+=(cplx s) {
    t_[0] += s;
    return *this;
  }
  Jet2& operator-=(cplx s) {
    t_[0] -= s;
    return *this;
  }

  friend Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
  friend Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
  friend Jet2 operator*(Jet2 a, cplx s) { return a *= s; }
  friend Jet2 operator*(cplx s, Jet2 a) { return a *= s; }
  friend Jet2 operator*(Jet2 a, double s) { return a *= s; }
  friend Jet2 operator*(double s, Jet2 a) { return a *= s; }
  friend Jet2 operator+(Jet2 a, cplx s) { return a += s; }
  friend Jet2 operator+(Jet2 a, double s) { return a += cplx(s); }
  friend Jet2 operator+(double s, Jet2 a) { return a += cplx(s); }
  friend Jet2 operator-(Jet2 a, double s) { return a -= cplx(s); }
  friend Jet2 operator-(double s, const Jet2& a) { return (-a) + s; }
  friend Jet2 operator-(const Jet2& a) { return a * cplx(-1.0); }

  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    Jet2 c(a.n_);
    for (int d1 = 0; d1 <= a.n_; ++d1)
      for (int i1 = 0; i1 <= d1; ++i1) {
        const cplx av = a(i1, d1 - i1);
        if (av == cplx(0.0)) continue;
        for (int d2 = 0; d1 + d2 <= a.n_; ++d2)
          for (int i2 = 0; i2 <= d2; ++i2) c(i1 + i2, d1 - i1 + d2 - i2) += av * b(i2, d2 - i2);
      }
    return c;
  }

  friend Jet2 operator/(const Jet2& a, const Jet2& b);

 private:
  int n_ = 0;
  std::vector<cplx> t_;
};

namespace detail {

/// f(x) for a jet x given the Taylor coefficients of f at x.value().
template <class J>
J compose(const J& x, const std::vector<cplx>& taylor) {
  J dx = x;
  dx += -x.value();
  J r(x.order(), taylor.back());
  for (int k = int(taylor.size()) - 2; k >= 0; --k) {
    r = r * dx;
    r += taylor[std::size_t(k)];
  }
  return r;
}

template <class J>
std::vector<cplx> exp_taylor(const J& x) {
  std::vector<cplx> t(std::size_t(x.order()) + 1);
  const cplx e = std::exp(x.value());
  double f = 1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k > 0) f *= double(k);
    t[k] = e / f;
  }
  return t;
}

// Taylor coefficients of x^a at x0: binom(a, k) x0^{a-k}.
template <class J>
std::vector<cplx> pow_taylor(const J& x, double a) {
  std::vector<cplx> t(std::size_t(x.order()) + 1);
  const cplx x0 = x.value();
  cplx c = std::pow(x0, a);
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k] = c;
    c *= (a - double(k)) / (double(k) + 1.0) / x0;
  }
  return t;
}

}  // namespace detail

inline Jet2 operator/(const Jet2& a, const Jet2& b) {
  return a * detail::compose(b, detail::pow_taylor(b, -1.0));
}

inline Jet exp(const Jet& x) { return detail::compose(x, detail::exp_taylor(x)); }
inline Jet2 exp(const Jet2& x) { return detail::compose(x, detail::exp_taylor(x)); }

inline Jet2 sqrt(const Jet2& x) { return detail::compose(x, detail::pow_taylor(x, 0.5)); }

inline Jet2 cos(const Jet2& x) {
  std::vector<cplx> t(std::size_t(x.order()) + 1);
  const cplx c = std::cos(x.value()), s = std::sin(x.value());
  const cplx cyc[4] = {c, -s, -c, s};
  double f = 1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k > 0) f *= double(k);
    t[k] = cyc[k % 4] / f;
  }
  return detail::compose(x, t);
}

inline Jet2 sin(const Jet2& x) {
  std::vector<cplx> t(std::size_t(x.order()) + 1);
  const cplx c = std::cos(x.value()), s = std::sin(x.value());
  const cplx cyc[4] = {s, c, -s, -c};
  double f = 1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k > 0) f *= double(k);
    t[k] = cyc[k % 4] / f;
  }
  return detail::compose(x, t);
}

}  // namespace helmfd
