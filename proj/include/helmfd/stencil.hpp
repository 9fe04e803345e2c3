#pragma once

// Reference stencil footprints and the stencil value type.

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace helmfd {

using Offset = std::array<int, 2>;

enum class StencilKind {
  Compact9,        // 3x3
  PmlInterior11,   // 3x3 plus (0, +-2)
  Interface15,     // {-1,0,1} x {-2..2}
  DanglingS13,
  DanglingTheta13,
  Auxiliary13,
  PmlAuxiliary15,
  Boundary,
};

inline const char* to_string(StencilKind k) {
  switch (k) {
    case StencilKind::Compact9: return "compact9";
    case StencilKind::PmlInterior11: return "pml_interior11";
    case StencilKind::Interface15: return "interface15";
    case StencilKind::DanglingS13: return "dangling_s13";
    case StencilKind::DanglingTheta13: return "dangling_theta13";
    case StencilKind::Auxiliary13: return "auxiliary13";
    case StencilKind::PmlAuxiliary15: return "pml_auxiliary15";
    case StencilKind::Boundary: return "boundary";
  }
  return "?";
}

/// Offsets in units of the local mesh size; the center (0,0) is always first.
inline std::vector<Offset> reference_offsets(StencilKind k) {
  std::vector<Offset> o{{0, 0}};
  auto add = [&](std::initializer_list<Offset> l) { o.insert(o.end(), l); };
  auto compact = [&] { add({{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}); };
  switch (k) {
    case StencilKind::Compact9: compact(); break;
    case StencilKind::PmlInterior11:
      compact();
      add({{0, -2}, {0, 2}});
      break;
    case StencilKind::Interface15:
      for (int i = -1; i <= 1; ++i)
        for (int j = -2; j <= 2; ++j)
          if (i != 0 || j != 0) o.push_back({i, j});
      break;
    case StencilKind::DanglingS13:
      add({{-2, -1}, {-2, 1}, {-1, -2}, {-1, 0}, {-1, 2}, {0, -3}, {0, 3}, {1, -2}, {1, 0}, {1, 2}, {2, -1}, {2, 1}});
      break;
    case StencilKind::DanglingTheta13:
      add({{-1, -2}, {1, -2}, {-2, -1}, {0, -1}, {2, -1}, {-3, 0}, {3, 0}, {-2, 1}, {0, 1}, {2, 1}, {-1, 2}, {1, 2}});
      break;
    case StencilKind::Auxiliary13:
      add({{-3, -1}, {-3, 1}, {3, -1}, {3, 1}, {-1, -3}, {1, -3}, {-1, 3}, {1, 3}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}});
      break;
    case StencilKind::PmlAuxiliary15:
      add({{-3, -1}, {-3, 1}, {3, -1}, {3, 1}, {-1, -3}, {1, -3}, {-1, 3}, {1, 3}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1},
           {0, -2}, {0, 2}});
      break;
    case StencilKind::Boundary: break;
  }
  return o;
}

/// Dimensionless stencil point: physical offset in (q, theta) divided by h.
struct StencilPoint {
  double x1 = 0.0, x2 = 0.0;
};

/// Node-level stencil: coefficients over points plus the source functional.
struct Stencil {
  StencilKind kind = StencilKind::Compact9;
  std::vector<StencilPoint> points;  // points[0] is the center
  std::vector<std::complex<double>> coeffs;
  Eigen::VectorXcd source_weights;   // RHS = source_weights . (partials of ft at the center)
  double q = 0.0;                    // radial coordinate of the center
  double h = 0.0;                    // local mesh size in q
  int order = 0;                     // target consistency order M
  bool minimized = false;
  double delta = 0.0;
  int modes = 0;                     // truncation J of the test-function expansion
  double objective = 0.0;            // unregularised objective at the returned coefficients
  double min_eig = 0.0;              // smallest Gram eigenvalue, minimised stencils only
};

}  // namespace helmfd
