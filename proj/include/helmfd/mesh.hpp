#pragma once

// Regular polar and exponentially stretched polar grids. Nodes live on an
// integer lattice (i, j) at interface resolution: q = q0 + i uq, theta = j ut.
// Stretched grids are coarsened dyadically in theta going inward from the
// interface, and optionally once more inside the layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "helmfd/error.hpp"
#include "helmfd/pde.hpp"
#include "helmfd/stencil.hpp"

namespace helmfd {

enum class NodeClass : std::uint8_t {
  Interior,
  Interface,
  DanglingS,
  DanglingTheta,
  Auxiliary,
  NearBoundary,
  DirichletOuter,
  DirichletScatterer,
};

inline const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::Interior: return "interior";
    case NodeClass::Interface: return "interface";
    case NodeClass::DanglingS: return "dangling_s";
    case NodeClass::DanglingTheta: return "dangling_theta";
    case NodeClass::Auxiliary: return "auxiliary";
    case NodeClass::NearBoundary: return "near_boundary";
    case NodeClass::DirichletOuter: return "dirichlet_outer";
    case NodeClass::DirichletScatterer: return "dirichlet_scatterer";
  }
  return "?";
}

inline bool is_dirichlet(NodeClass c) { return c == NodeClass::DirichletOuter || c == NodeClass::DirichletScatterer; }

enum class Refinement { None, UniformDyadic, AdaptiveNear };

inline const char* to_string(Refinement r) {
  switch (r) {
    case Refinement::None: return "none";
    case Refinement::UniformDyadic: return "uniform_dyadic";
    case Refinement::AdaptiveNear: return "adaptive_near";
  }
  return "?";
}

inline Refinement refinement_from_string(const std::string& s) {
  if (s == "none") return Refinement::None;
  if (s == "uniform_dyadic") return Refinement::UniformDyadic;
  if (s == "adaptive_near") return Refinement::AdaptiveNear;
  throw Error(ErrorCode::Config, "unknown refinement '" + s + "'");
}

/// Annulus r_lo <= r <= r_hi whose blocks are coarsened at most max_level times.
struct AnnularRegion {
  double r_lo = 0.0, r_hi = 0.0;
  int max_level = 0;
};

struct MeshOptions {
  Refinement refinement = Refinement::None;
  std::vector<AnnularRegion> regions;
  int quantum = 1;  // r_*, r_M and transitions snap to multiples of this many lattice rows
  bool pml_coarsening = true;
  int max_depth = 6;
  bool scatterer_on_grid = true;  // row 0 is the scatterer boundary; otherwise it lies inside D
};

struct MeshRow {
  int i = 0;
  int step = 1;    // theta spacing in lattice units
  int offset = 0;  // theta index of the first node
  int level = 0;
  bool auxiliary = false;
  int first = 0;
  int count = 0;
};

struct MeshNode {
  int i = 0, j = 0;
  NodeClass cls = NodeClass::Interior;
  std::uint8_t level = 0;  // log2 of factor
  int factor = 1;          // local mesh size in lattice units
};

struct Mesh {
  Coords coords = Coords::Stretched;
  double q0 = 0.0;
  double uq = 0.0, ut = 0.0;
  int n_theta = 0;
  int i_star = 0, i_max = 0;
  double h = 0.0;  // physical mesh size at the interface
  double r_star_target = 0.0, r_max_target = 0.0;
  std::vector<MeshRow> rows;
  std::vector<int> row_at;       // lattice row -> rows index, -1 if absent
  std::vector<int> transitions;  // inward transitions, outermost first
  int pml_transition = -1;
  bool scatterer_on_grid = true;
  std::vector<MeshNode> nodes;

  std::size_t size() const { return nodes.size(); }
  double q_of(int i) const { return q0 + i * uq; }
  double theta_of(int j) const { return j * ut; }
  double q_star() const { return q_of(i_star); }
  double q_max() const { return q_of(i_max); }
  double r_of(int i) const { return coords == Coords::Stretched ? std::exp(q_of(i)) : q_of(i); }
  double r_star() const { return r_of(i_star); }
  double r_max() const { return r_of(i_max); }
  double q(int id) const { return q_of(nodes[std::size_t(id)].i); }
  double theta(int id) const { return theta_of(nodes[std::size_t(id)].j); }
  double radius(int id) const { return r_of(nodes[std::size_t(id)].i); }
  double x(int id) const { return radius(id) * std::cos(theta(id)); }
  double y(int id) const { return radius(id) * std::sin(theta(id)); }
  double local_h(int id) const { return nodes[std::size_t(id)].factor * uq; }
  double theta_scale() const { return ut / uq; }

  int find(int i, int j) const {
    if (i < 0 || i > i_max) return -1;
    const int r = row_at[std::size_t(i)];
    if (r < 0) return -1;
    const MeshRow& row = rows[std::size_t(r)];
    int jj = j % n_theta;
    if (jj < 0) jj += n_theta;
    const int d = jj - row.offset;
    if (d < 0 || d % row.step != 0) return -1;
    return row.first + d / row.step;
  }

  /// Node at offset o measured in the local mesh size of `id`.
  int neighbor(int id, Offset o) const {
    const MeshNode& n = nodes[std::size_t(id)];
    return find(n.i + o[0] * n.factor, n.j + o[1] * n.factor);
  }

  std::size_t count(NodeClass c) const {
    return std::size_t(std::count_if(nodes.begin(), nodes.end(), [c](const MeshNode& n) { return n.cls == c; }));
  }
  std::size_t unknowns() const {
    return std::size_t(std::count_if(nodes.begin(), nodes.end(), [](const MeshNode& n) { return !is_dirichlet(n.cls); }));
  }

  /// Largest P dividing n_theta such that rotating by P lattice columns maps
  /// every row onto itself.
  int rotation_period() const {
    int p = 1;
    for (auto& r : rows) p = std::lcm(p, r.step);
    return p;
  }
};

namespace detail {

inline void add_row(Mesh& m, int i, int step, int offset, bool aux) {
  MeshRow r;
  r.i = i;
  r.step = step;
  r.offset = offset;
  r.auxiliary = aux;
  r.level = 0;
  while ((1 << r.level) < step) ++r.level;
  r.first = int(m.nodes.size());
  r.count = (m.n_theta - offset + step - 1) / step;
  if (m.n_theta % step != 0) throw Error(ErrorCode::Refinement, "theta count not divisible by the block spacing");
  m.row_at[std::size_t(i)] = int(m.rows.size());
  m.rows.push_back(r);
  for (int k = 0; k < r.count; ++k) m.nodes.push_back(MeshNode{i, offset + k * step, NodeClass::Interior, 0, step});
}

inline int round_to(double x, int quantum) { return int(std::lround(x / quantum)) * quantum; }

inline void classify_rows(Mesh& m, bool scatterer_on_grid) {
  m.scatterer_on_grid = scatterer_on_grid;
  auto is_transition = [&](int i) {
    return std::find(m.transitions.begin(), m.transitions.end(), i) != m.transitions.end() || i == m.pml_transition;
  };
  for (auto& row : m.rows) {
    for (int k = 0; k < row.count; ++k) {
      MeshNode& n = m.nodes[std::size_t(row.first + k)];
      n.factor = row.step;
      if (row.auxiliary) {
        n.cls = NodeClass::Auxiliary;
        n.factor = row.step / 2;
      } else if (row.i == m.i_max) {
        n.cls = NodeClass::DirichletOuter;
      } else if (row.i == 0 && scatterer_on_grid) {
        n.cls = NodeClass::DirichletScatterer;
      } else if (row.i == m.i_star) {
        n.cls = NodeClass::Interface;
      } else if (is_transition(row.i)) {
        if (n.j % (2 * row.step) != 0) {
          n.cls = NodeClass::DanglingS;
        } else {
          n.cls = NodeClass::Interior;
          n.factor = 2 * row.step;
        }
      } else {
        n.cls = NodeClass::Interior;
      }
      std::uint8_t l = 0;
      while ((1 << l) < n.factor) ++l;
      n.level = l;
    }
  }
}

inline void check_targets(double anchor, double r_star, double r_max, int n) {
  if (n < 8) throw Error(ErrorCode::InvalidParameter, "theta count N must be at least 8");
  if (!(anchor > 0.0)) throw Error(ErrorCode::Geometry, "scatterer radius must be positive");
  if (anchor >= r_star) throw Error(ErrorCode::Geometry, "scatterer radius must be below r_star");
  if (!(r_max > r_star)) throw Error(ErrorCode::InvalidParameter, "r_max must exceed r_star");
}

}  // namespace detail

/// Regular polar grid: h = h_r = r_* h_theta with h_theta = 2 pi / N.
inline Mesh build_regular_polar(double r_star, double r_max, int n_theta, double scatterer_radius,
                                const MeshOptions& opt = {}) {
  detail::check_targets(scatterer_radius, r_star, r_max, n_theta);
  Mesh m;
  m.coords = Coords::Regular;
  m.n_theta = n_theta;
  m.ut = 2.0 * M_PI / n_theta;
  m.uq = r_star * m.ut;
  m.h = m.uq;
  m.q0 = scatterer_radius;
  m.r_star_target = r_star;
  m.r_max_target = r_max;
  const int Q = std::max(1, opt.quantum);
  m.i_star = detail::round_to((r_star - m.q0) / m.uq, Q);
  if (m.i_star < 1) throw Error(ErrorCode::Geometry, "too few rows between the scatterer and the interface");
  m.i_max = m.i_star + std::max(Q, detail::round_to((r_max - m.q_star()) / m.uq, Q));
  m.row_at.assign(std::size_t(m.i_max) + 1, -1);
  for (int i = 0; i <= m.i_max; ++i) detail::add_row(m, i, 1, 0, false);
  detail::classify_rows(m, opt.scatterer_on_grid);
  return m;
}

/// Exponentially stretched grid in (s, theta) with s = log r, h_s = h_theta = 2 pi / N
/// at the interface.
inline Mesh build_stretched(double r_star, double r_max, int n_theta, double scatterer_radius,
                            const MeshOptions& opt = {}) {
  detail::check_targets(scatterer_radius, r_star, r_max, n_theta);
  Mesh m;
  m.coords = Coords::Stretched;
  m.n_theta = n_theta;
  m.ut = m.uq = 2.0 * M_PI / n_theta;
  m.q0 = std::log(scatterer_radius);
  m.r_star_target = r_star;
  m.r_max_target = r_max;
  const int Q = std::max(1, opt.quantum);
  m.i_star = detail::round_to((std::log(r_star) - m.q0) / m.uq, Q);
  if (m.i_star < 3) throw Error(ErrorCode::Geometry, "too few rows between the scatterer and the interface");
  m.i_max = m.i_star + std::max(Q, detail::round_to((std::log(r_max) - m.q_star()) / m.uq, Q));
  m.h = m.r_star() * m.uq;

  // nominal transitions every log 2 inward from the interface
  std::vector<double> nominal;
  if (opt.refinement != Refinement::None) {
    if (opt.refinement == Refinement::AdaptiveNear && opt.regions.empty())
      throw Error(ErrorCode::Refinement, "adaptive refinement needs at least one region");
    if (opt.max_depth < 0 || opt.max_depth > 6) throw Error(ErrorCode::Refinement, "refinement depth must be in [0, 6]");
    for (int k = 1; k <= opt.max_depth; ++k) {
      const double p = m.q_star() - k * std::log(2.0);
      if (p <= m.q0) break;
      bool capped = false;
      for (auto& reg : opt.regions)
        if (k > reg.max_level && std::exp(p) > reg.r_lo) capped = true;
      if (capped) break;
      nominal.push_back(p);
    }
  }
  const int depth = int(nominal.size());
  const int Qt = std::lcm(Q, 1 << depth);
  int prev = m.i_star;
  for (int k = 1; k <= depth; ++k) {
    int t = detail::round_to((nominal[std::size_t(k - 1)] - m.q0) / m.uq, Qt);
    if (k == 1) t = std::min(t, ((m.i_star - 3) / Qt) * Qt);
    const int fine = 1 << (k - 1), coarse = 1 << k;
    if (t <= 0 || prev - t < std::max(Qt, 3 * fine) || t < std::max(Qt, 3 * coarse)) break;
    m.transitions.push_back(t);
    prev = t;
  }
  if (!m.transitions.empty() && opt.pml_coarsening) {
    int t = ((m.i_star + 3 + Qt - 1) / Qt) * Qt;
    if ((m.i_max - t) % 2 == 0 && m.i_max - t >= 4) m.pml_transition = t;
  }

  // lattice rows
  m.row_at.assign(std::size_t(m.i_max) + 1, -1);
  auto spacing = [&](int i) {
    int k = 0;
    for (int t : m.transitions)
      if (i < t) ++k;
    if (m.pml_transition >= 0 && i > m.pml_transition) return 2;
    return 1 << k;
  };
  for (int i = 0; i <= m.i_max; ++i) {
    const int s = spacing(i);
    bool regular = m.pml_transition >= 0 && i > m.pml_transition ? (i - m.pml_transition) % 2 == 0 : i % s == 0;
    if (regular) {
      detail::add_row(m, i, s, 0, false);
      continue;
    }
    for (std::size_t k = 0; k < m.transitions.size(); ++k) {
      const int f = 1 << k;
      if (i == m.transitions[k] - f) detail::add_row(m, i, 2 * f, f, true);
    }
    if (i == m.pml_transition + 1) detail::add_row(m, i, 2, 1, true);
  }
  if (m.row_at[std::size_t(m.i_max)] < 0) throw Error(ErrorCode::Refinement, "outer boundary is not a grid row");
  detail::classify_rows(m, opt.scatterer_on_grid);
  return m;
}

/// Grid stencil kind used for a node, by class and region.
inline StencilKind grid_stencil_kind(const Mesh& m, int id) {
  const MeshNode& n = m.nodes[std::size_t(id)];
  const bool pml = n.i > m.i_star;
  if (m.coords == Coords::Regular) {
    if (n.cls == NodeClass::Interior || n.cls == NodeClass::Interface) return StencilKind::Compact9;
  } else {
    switch (n.cls) {
      case NodeClass::Interior: return pml ? StencilKind::PmlInterior11 : StencilKind::Compact9;
      case NodeClass::Interface: return StencilKind::Interface15;
      case NodeClass::DanglingS: return StencilKind::DanglingS13;
      case NodeClass::DanglingTheta: return StencilKind::DanglingTheta13;
      case NodeClass::Auxiliary: return pml ? StencilKind::PmlAuxiliary15 : StencilKind::Auxiliary13;
      default: break;
    }
  }
  throw Error(ErrorCode::MissingStencil, std::string("no grid stencil for class ") + to_string(n.cls));
}

/// Node ids of the reference footprint, -1 where a node is missing.
inline std::vector<int> footprint(const Mesh& m, int id, StencilKind kind) {
  std::vector<int> ids;
  for (auto& o : reference_offsets(kind)) ids.push_back(m.neighbor(id, o));
  return ids;
}

/// Cartesian cell diameters, one per cell between consecutive regular rows.
struct CellSize {
  int i_lo, i_hi;
  double diameter;
};

inline std::vector<CellSize> cell_sizes(const Mesh& m) {
  std::vector<CellSize> out;
  const MeshRow* prev = nullptr;
  for (auto& r : m.rows) {
    if (r.auxiliary) continue;
    if (prev) {
      const int w = std::max(prev->step, r.step), ht = r.i - prev->i;
      const double qm = 0.5 * (m.q_of(prev->i) + m.q_of(r.i));
      const double rm = m.coords == Coords::Stretched ? std::exp(qm) : qm;
      out.push_back({prev->i, r.i, std::hypot(rm * w * m.ut, ht * m.uq * (m.coords == Coords::Stretched ? rm : 1.0))});
    }
    prev = &r;
  }
  return out;
}

/// CSV: node_id, r, theta, x, y, class, local_h, level.
inline void write_mesh_csv(const Mesh& m, std::ostream& os) {
  os << "node_id,r,theta,x,y,class,local_h,level\n";
  os.precision(17);
  for (std::size_t k = 0; k < m.size(); ++k) {
    const int id = int(k);
    os << id << ',' << m.radius(id) << ',' << m.theta(id) << ',' << m.x(id) << ',' << m.y(id) << ','
       << to_string(m.nodes[k].cls) << ',' << m.local_h(id) << ',' << int(m.nodes[k].level) << '\n';
  }
}

}  // namespace helmfd
