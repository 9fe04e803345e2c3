#pragma once

// Non-circular scatterers: geometry, detection of nodes whose grid footprint
// reaches into D, and boundary stencils built from nearby grid nodes plus five
// points on the boundary, with pollution-minimised coefficients.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "helmfd/error.hpp"
#include "helmfd/mesh.hpp"
#include "helmfd/stencil_pollution.hpp"

namespace helmfd {

using Point2 = std::array<double, 2>;

/// Closed curve t -> p(t), t in [0, period).
struct Curve {
  std::function<Point2(double)> p;
  std::function<Point2(double)> dp;
  double period = 2.0 * M_PI;
};

/// Scatterer D given by its boundary components and an inside test.
struct ScattererGeometry {
  std::string kind;
  std::vector<Curve> components;
  std::function<double(double, double)> level;  // < 0 inside D, 0 on the boundary
  int symmetry = 1;                               // D is invariant under rotation by 2 pi / symmetry
  double circle_radius = 0.0;                     // > 0 for a centred circle

  bool is_centred_circle() const { return circle_radius > 0.0; }
  bool inside(double x, double y) const { return level(x, y) < 0.0; }

  /// min and max of |p| over the boundary, by sampling.
  std::pair<double, double> radial_extent(int samples = 4096) const {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (auto& c : components)
      for (int k = 0; k < samples; ++k) {
        const Point2 q = c.p(c.period * k / samples);
        const double r = std::hypot(q[0], q[1]);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    return {lo, hi};
  }
};

inline ScattererGeometry make_circle(double radius) {
  ScattererGeometry g;
  g.kind = "circle";
  g.circle_radius = radius;
  g.symmetry = 0;
  g.components.push_back({[radius](double t) { return Point2{radius * std::cos(t), radius * std::sin(t)}; },
                          [radius](double t) { return Point2{-radius * std::sin(t), radius * std::cos(t)}; }});
  g.level = [radius](double x, double y) { return std::hypot(x, y) - radius; };
  return g;
}

/// r < a + b sin(m theta).
inline ScattererGeometry make_polar_curve(double a, double b, int m) {
  if (!(a > std::abs(b))) throw Error(ErrorCode::Geometry, "polar curve must stay away from the origin");
  ScattererGeometry g;
  g.kind = "polar_curve";
  g.symmetry = m;
  auto r = [=](double t) { return a + b * std::sin(m * t); };
  auto dr = [=](double t) { return b * m * std::cos(m * t); };
  g.components.push_back({[=](double t) { return Point2{r(t) * std::cos(t), r(t) * std::sin(t)}; },
                          [=](double t) {
                            return Point2{dr(t) * std::cos(t) - r(t) * std::sin(t),
                                          dr(t) * std::sin(t) + r(t) * std::cos(t)};
                          }});
  g.level = [=](double x, double y) { return std::hypot(x, y) - r(std::atan2(y, x)); };
  return g;
}

/// Union of discs of a common radius.
inline ScattererGeometry make_disk_union(const std::vector<Point2>& centers, double radius, int symmetry = 1) {
  ScattererGeometry g;
  g.kind = "disk_union";
  g.symmetry = symmetry;
  for (auto c : centers)
    g.components.push_back(
        {[c, radius](double t) { return Point2{c[0] + radius * std::cos(t), c[1] + radius * std::sin(t)}; },
         [radius](double t) { return Point2{-radius * std::sin(t), radius * std::cos(t)}; }});
  g.level = [centers, radius](double x, double y) {
    double d = std::numeric_limits<double>::infinity();
    for (auto c : centers) d = std::min(d, std::hypot(x - c[0], y - c[1]) - radius);
    return d;
  };
  return g;
}

/// (x^2 + (y - 1)^2)(x^2 + (y + 1)^2) < c. The components are traced radially
/// around the foci (0, +-1), which requires c < 1 (two separate ovals).
inline ScattererGeometry make_implicit_quartic(double c) {
  if (!(c > 0.0 && c < 1.0)) throw Error(ErrorCode::Geometry, "implicit quartic needs 0 < c < 1");
  ScattererGeometry g;
  g.kind = "implicit_quartic";
  g.symmetry = 2;
  auto F = [](double x, double y) { return (x * x + (y - 1) * (y - 1)) * (x * x + (y + 1) * (y + 1)); };
  g.level = [=](double x, double y) { return F(x, y) - c; };
  for (double fy : {1.0, -1.0}) {
    // radius along direction t from the focus, by bisection (F increases along each ray near the focus)
    auto rad = [=](double t) {
      double lo = 0.0, hi = 1.0;
      for (int k = 0; k < 80; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (F(mid * std::cos(t), fy + mid * std::sin(t)) < c) lo = mid;
        else hi = mid;
      }
      return 0.5 * (lo + hi);
    };
    auto p = [=](double t) {
      const double r = rad(t);
      return Point2{r * std::cos(t), fy + r * std::sin(t)};
    };
    auto dp = [=](double t) {
      const double e = 1e-6;
      const Point2 a = p(t + e), b = p(t - e);
      return Point2{(a[0] - b[0]) / (2 * e), (a[1] - b[1]) / (2 * e)};
    };
    g.components.push_back({p, dp});
  }
  return g;
}

/// Closed periodic cubic spline through polyline vertices (chord-length parameter).
inline ScattererGeometry make_polyline_spline(const std::vector<Point2>& vertices, int symmetry = 1) {
  const int n = int(vertices.size());
  if (n < 4) throw Error(ErrorCode::Geometry, "polyline needs at least four vertices");
  std::vector<double> knots(std::size_t(n) + 1, 0.0);
  for (int k = 0; k < n; ++k) {
    const Point2 a = vertices[std::size_t(k)], b = vertices[std::size_t((k + 1) % n)];
    knots[std::size_t(k) + 1] = knots[std::size_t(k)] + std::hypot(b[0] - a[0], b[1] - a[1]);
  }
  const double L = knots.back();
  // second derivatives of the periodic spline, per coordinate
  std::array<Eigen::VectorXd, 2> M2;
  for (int d = 0; d < 2; ++d) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs(n);
    for (int k = 0; k < n; ++k) {
      const int km = (k + n - 1) % n, kp = (k + 1) % n;
      const double hm = k == 0 ? L - knots[std::size_t(n - 1)] : knots[std::size_t(k)] - knots[std::size_t(k - 1)];
      const double hp = knots[std::size_t(k) + 1] - knots[std::size_t(k)];
      A(k, km) += hm / 6.0;
      A(k, k) += (hm + hp) / 3.0;
      A(k, kp) += hp / 6.0;
      const double ym = vertices[std::size_t(km)][std::size_t(d)], y0 = vertices[std::size_t(k)][std::size_t(d)],
                   yp = vertices[std::size_t(kp)][std::size_t(d)];
      rhs[k] = (yp - y0) / hp - (y0 - ym) / hm;
    }
    M2[std::size_t(d)] = A.partialPivLu().solve(rhs);
  }
  auto segment = [=](double t, int& k, double& a) {
    t = std::fmod(t, L);
    if (t < 0) t += L;
    k = int(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
    k = std::clamp(k, 0, n - 1);
    a = t - knots[std::size_t(k)];
  };
  auto eval = [=](double t, bool deriv) {
    int k;
    double a;
    segment(t, k, a);
    const int kp = (k + 1) % n;
    const double hk = knots[std::size_t(k) + 1] - knots[std::size_t(k)], b = hk - a;
    Point2 out{};
    for (int d = 0; d < 2; ++d) {
      const double m0 = M2[std::size_t(d)][k], m1 = M2[std::size_t(d)][kp];
      const double y0 = vertices[std::size_t(k)][std::size_t(d)], y1 = vertices[std::size_t(kp)][std::size_t(d)];
      if (!deriv)
        out[std::size_t(d)] = m0 * b * b * b / (6 * hk) + m1 * a * a * a / (6 * hk) + (y0 / hk - m0 * hk / 6) * b +
                              (y1 / hk - m1 * hk / 6) * a;
      else
        out[std::size_t(d)] = -m0 * b * b / (2 * hk) + m1 * a * a / (2 * hk) - (y0 / hk - m0 * hk / 6) +
                              (y1 / hk - m1 * hk / 6);
    }
    return out;
  };
  ScattererGeometry g;
  g.kind = "polyline";
  g.symmetry = symmetry;
  g.components.push_back({[=](double t) { return eval(t, false); }, [=](double t) { return eval(t, true); }, L});
  // winding-number inside test against a fine sampling of the spline
  std::vector<Point2> poly;
  const int ns = 64 * n;
  for (int k = 0; k < ns; ++k) poly.push_back(eval(L * k / ns, false));
  g.level = [poly](double x, double y) {
    bool in = false;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0, b = poly.size() - 1; a < poly.size(); b = a++) {
      const Point2 p = poly[a], q = poly[b];
      if ((p[1] > y) != (q[1] > y) && x < (q[0] - p[0]) * (y - p[1]) / (q[1] - p[1]) + p[0]) in = !in;
      const double ex = q[0] - p[0], ey = q[1] - p[1];
      const double s = std::clamp(((x - p[0]) * ex + (y - p[1]) * ey) / (ex * ex + ey * ey), 0.0, 1.0);
      d = std::min(d, std::hypot(x - p[0] - s * ex, y - p[1] - s * ey));
    }
    return in ? -d : d;
  };
  return g;
}

struct ClosestPoint {
  int component = 0;
  double t = 0.0;
  Point2 p{};
  double distance = 0.0;
};

inline ClosestPoint closest_point_on(const ScattererGeometry& g, int component, Point2 x, int samples = 2048) {
  const Curve& cu = g.components[std::size_t(component)];
  double tb = 0.0, db = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double t = cu.period * k / samples;
    const Point2 q = cu.p(t);
    const double d = std::hypot(q[0] - x[0], q[1] - x[1]);
    if (d < db) db = d, tb = t;
  }
  // bisection on the sign of (p - x).p' over the bracketing samples
  double a = tb - cu.period / samples, b = tb + cu.period / samples;
  auto dist = [&](double t) {
    const Point2 q = cu.p(t);
    return std::hypot(q[0] - x[0], q[1] - x[1]);
  };
  auto slope = [&](double t) {
    const Point2 q = cu.p(t), d = cu.dp(t);
    return (q[0] - x[0]) * d[0] + (q[1] - x[1]) * d[1];
  };
  if (slope(a) <= 0.0 && slope(b) >= 0.0) {
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      (slope(mid) < 0.0 ? a : b) = mid;
    }
  } else {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a), f1 = dist(c1), f2 = dist(c2);
    for (int it = 0; it < 100 && b - a > 1e-15 * cu.period; ++it) {
      if (f1 < f2) {
        b = c2, c2 = c1, f2 = f1, c1 = b - gr * (b - a), f1 = dist(c1);
      } else {
        a = c1, c1 = c2, f1 = f2, c2 = a + gr * (b - a), f2 = dist(c2);
      }
    }
  }
  const double t = 0.5 * (a + b);
  return {component, t, cu.p(t), dist(t)};
}

inline ClosestPoint closest_point(const ScattererGeometry& g, Point2 x, int samples = 2048) {
  ClosestPoint best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < g.components.size(); ++c) {
    auto cp = closest_point_on(g, int(c), x, samples);
    if (cp.distance < best.distance) best = cp;
  }
  return best;
}

/// Five boundary points around the base point with physical spacing ~h.
inline std::vector<Point2> boundary_points(const ScattererGeometry& g, const ClosestPoint& b, double h, int half = 2) {
  const Curve& c = g.components[std::size_t(b.component)];
  const Point2 d = c.dp(b.t);
  const double sigma = std::hypot(d[0], d[1]);
  if (!(sigma > 0.0)) throw Error(ErrorCode::DegenerateTangent, "boundary parametrisation has zero speed");
  std::vector<Point2> out;
  for (int k = -half; k <= half; ++k) out.push_back(c.p(b.t + k * h / sigma));
  return out;
}

/// Boundary stencil: grid nodes first (centre at index 0), then the boundary points.
struct BoundaryStencil {
  int center = -1;
  Point2 base{};
  std::vector<int> nodes;
  std::vector<Point2> bpoints;
  std::vector<cplx> coeffs;  // nodes.size() + bpoints.size() entries, coeffs[0] = 1
  double h = 0.0;            // physical spacing of the boundary points
  double delta = 0.0, objective = 0.0, min_eig = 0.0, distance = 0.0;
  int modes = 0;
};

/// Rotation of the lattice by `period` theta columns.
struct LatticeRotation {
  int period = 0;  // lattice columns per sector
  int copies = 1;
};

/// Sector decomposition used for rotationally symmetric problems.
inline LatticeRotation lattice_rotation(const Mesh& m, const ScattererGeometry& g) {
  const int base = m.rotation_period();
  const int cap = m.n_theta / base;
  int k = g.is_centred_circle() ? cap : std::gcd(cap, std::max(1, g.symmetry));
  return {m.n_theta / k, k};
}

inline int rotate_node(const Mesh& m, int id, int shift_columns) {
  const auto& n = m.nodes[std::size_t(id)];
  return m.find(n.i, n.j + shift_columns);
}

inline Point2 rotate_point(Point2 p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p[0] - s * p[1], s * p[0] + c * p[1]};
}

namespace detail {

inline bool footprint_in_omega(const Mesh& m, int id, const std::vector<bool>& in_d) {
  if (is_dirichlet(m.nodes[std::size_t(id)].cls)) return true;
  for (int nb : footprint(m, id, grid_stencil_kind(m, id)))
    if (nb < 0 || in_d[std::size_t(nb)]) return false;
  return true;
}

}  // namespace detail

/// Marks nodes inside D as DirichletScatterer and nodes whose grid footprint
/// reaches into D as NearBoundary. Only the first sector is examined; other
/// sectors copy it so that symmetric meshes stay exactly symmetric.
inline std::vector<int> detect_boundary_nodes(Mesh& m, const ScattererGeometry& g, LatticeRotation rot = {}) {
  if (g.is_centred_circle() && m.scatterer_on_grid && std::abs(m.r_of(0) - g.circle_radius) <= 1e-12 * g.circle_radius)
    return {};
  if (rot.period == 0) rot = {m.n_theta, 1};
  std::vector<bool> in_d(m.size(), false);
  const double scale = std::max(1.0, m.r_max());
  for (std::size_t k = 0; k < m.size(); ++k) {
    const auto& n = m.nodes[k];
    if (n.j >= rot.period) continue;
    const double lv = g.level(m.x(int(k)), m.y(int(k)));
    if (std::abs(lv) <= 1e-13 * scale)
      throw Error(ErrorCode::Geometry, "grid node lies on the scatterer boundary; perturb the mesh");
    in_d[k] = lv < 0.0;
  }
  auto copy_sector = [&](auto&& get, auto&& set) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      const auto& n = m.nodes[k];
      if (n.j < rot.period) continue;
      const int rep = m.find(n.i, n.j % rot.period);
      set(k, get(std::size_t(rep)));
    }
  };
  copy_sector([&](std::size_t r) { return bool(in_d[r]); }, [&](std::size_t k, bool v) { in_d[k] = v; });
  for (std::size_t k = 0; k < m.size(); ++k)
    if (in_d[k]) {
      if (m.nodes[k].i >= m.i_star) throw Error(ErrorCode::Geometry, "scatterer reaches the interface");
      m.nodes[k].cls = NodeClass::DirichletScatterer;
    }
  std::vector<bool> near(m.size(), false);
  for (std::size_t k = 0; k < m.size(); ++k)
    if (m.nodes[k].j < rot.period && !in_d[k] && !detail::footprint_in_omega(m, int(k), in_d)) near[k] = true;
  copy_sector([&](std::size_t r) { return bool(near[r]); }, [&](std::size_t k, bool v) { near[k] = v; });
  std::vector<int> out;
  for (std::size_t k = 0; k < m.size(); ++k)
    if (near[k]) {
      const auto c = m.nodes[k].cls;
      if (c == NodeClass::Interface || c == NodeClass::DirichletOuter)
        throw Error(ErrorCode::Geometry, "scatterer too close to the interface");
      m.nodes[k].cls = NodeClass::NearBoundary;
      out.push_back(int(k));
    }
  return out;
}

/// Physical mesh size at a node.
inline double physical_local_h(const Mesh& m, int id) {
  return m.coords == Coords::Stretched ? m.radius(id) * m.local_h(id) : m.local_h(id);
}

/// Grid part of a boundary stencil: the compact footprint clipped to nodes in
/// Omega, extended toward the interior normal until at least `min_points` nodes.
inline std::vector<int> boundary_seed_nodes(const Mesh& m, int id, Point2 normal, int min_points = 7) {
  auto usable = [&](int nb) {
    if (nb < 0) return false;
    const auto c = m.nodes[std::size_t(nb)].cls;
    return !is_dirichlet(c);
  };
  std::vector<int> nodes{id};
  for (auto& o : reference_offsets(StencilKind::Compact9)) {
    if (o[0] == 0 && o[1] == 0) continue;
    const int nb = m.neighbor(id, o);
    if (usable(nb)) nodes.push_back(nb);
  }
  for (int ring = 2; ring <= 5 && int(nodes.size()) < min_points; ++ring) {
    std::vector<std::pair<double, int>> cand;
    for (int a = -ring; a <= ring; ++a)
      for (int b = -ring; b <= ring; ++b) {
        if (std::max(std::abs(a), std::abs(b)) != ring) continue;
        const int nb = m.neighbor(id, {a, b});
        if (!usable(nb)) continue;
        const double dx = m.x(nb) - m.x(id), dy = m.y(nb) - m.y(id);
        cand.push_back({-(dx * normal[0] + dy * normal[1]) / std::hypot(dx, dy), nb});
      }
    std::sort(cand.begin(), cand.end());
    for (auto& c : cand) {
      if (int(nodes.size()) >= min_points) break;
      nodes.push_back(c.second);
    }
  }
  return nodes;
}

/// Pollution-minimised boundary stencil at node id.
inline BoundaryStencil boundary_stencil(const Mesh& m, const ScattererGeometry& g, int id, double kappa,
                                       DeltaPolicy policy = {}) {
  BoundaryStencil s;
  s.center = id;
  const Point2 xi{m.x(id), m.y(id)};
  const ClosestPoint cp = closest_point(g, xi);
  s.base = cp.p;
  s.distance = cp.distance;
  Point2 normal{xi[0] - cp.p[0], xi[1] - cp.p[1]};
  const double nn = std::hypot(normal[0], normal[1]);
  normal = {normal[0] / nn, normal[1] / nn};
  s.h = physical_local_h(m, id);
  s.nodes = boundary_seed_nodes(m, id, normal);
  s.bpoints = boundary_points(g, cp, s.h);
  // squeezed between two components: sample the other side as well
  if (s.nodes.size() + s.bpoints.size() < 12 && g.components.size() > 1) {
    ClosestPoint other;
    other.distance = std::numeric_limits<double>::infinity();
    for (int c = 0; c < int(g.components.size()); ++c) {
      if (c == cp.component) continue;
      auto o = closest_point_on(g, c, xi);
      if (o.distance < other.distance) other = o;
    }
    if (other.distance < 3.0 * s.h)
      for (auto& b : boundary_points(g, other, s.h)) s.bpoints.push_back(b);
  }
  const std::size_t np = s.nodes.size() + s.bpoints.size();
  if (np < 12)
    throw Error(ErrorCode::InsufficientStencil, "boundary stencil at (" + std::to_string(xi[0]) + ", " +
                                                    std::to_string(xi[1]) + ") has " + std::to_string(np) + " points, need 12");
  std::vector<ModePoint> pts;
  const double t0 = m.theta(id);
  auto add = [&](double x, double y) { pts.push_back({std::hypot(x, y), std::atan2(y, x) - t0}); };
  for (int nb : s.nodes) add(m.x(nb), m.y(nb));
  for (auto& b : s.bpoints) add(b[0], b[1]);
  const auto mm = test_function_modes(TestRegion::Regular, kappa, m.r_star(), pts);
  const auto r = minimize_with_policy(mm, true, true, policy);
  s.coeffs.assign(r.coeffs.data(), r.coeffs.data() + r.coeffs.size());
  s.delta = r.delta;
  s.objective = r.tilde;
  s.min_eig = r.min_eig;
  s.modes = r.J;
  return s;
}

}  // namespace helmfd
