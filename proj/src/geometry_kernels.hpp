#pragma once

// Pointwise radial-graph geometry shared by compute_frame and the time
// stepper. Internal header.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "starflow/error.hpp"
#include "starflow/geometry.hpp"

namespace starflow::detail {

struct NodeGeometry {
  double r_phi = 0.0;
  double r_phiphi = 0.0;
  double s = 0.0;  // |dX/dphi|
  double kappa_profile = 0.0;
  double kappa_rot = 0.0;
  double H = 0.0;
  double A2 = 0.0;
};

/// Ghost-aware neighbour values. Curves are periodic; axisymmetric profiles
/// reflect evenly through both poles.
inline void neighbours(Mode mode, std::span<const double> r, std::size_t i,
                       double& rm, double& rp) {
  const std::size_t m = r.size();
  if (mode == Mode::kCurve2D) {
    rm = r[(i + m - 1) % m];
    rp = r[(i + 1) % m];
  } else {
    rm = i == 0 ? r[1] : r[i - 1];
    rp = i + 1 == m ? r[m - 2] : r[i + 1];
  }
}

inline bool is_pole(Mode mode, std::size_t i, std::size_t m) {
  return mode == Mode::kAxisym && (i == 0 || i + 1 == m);
}

/// `cot` is cot(phi) at the node; ignored for curves and at the poles.
inline NodeGeometry node_geometry(Mode mode, int n, double rm, double r0,
                                  double rp, double h, double cot, bool pole) {
  NodeGeometry g;
  g.r_phi = (rp - rm) / (2.0 * h);
  g.r_phiphi = (rp - 2.0 * r0 + rm) / (h * h);
  if (std::abs(g.r_phi) > kGaugeCeiling * r0 || !(r0 > 0.0))
    throw Error(ErrorCode::kDegenerate,
                "|r_phi|/r exceeds the radial gauge ceiling");
  const double s2 = r0 * r0 + g.r_phi * g.r_phi;
  g.s = std::sqrt(s2);
  g.kappa_profile =
      (r0 * r0 + 2.0 * g.r_phi * g.r_phi - r0 * g.r_phiphi) / (s2 * g.s);
  if (mode == Mode::kAxisym && n >= 2) {
    if (pole) {
      g.kappa_rot = g.kappa_profile;
    } else {
      g.kappa_rot = (1.0 - g.r_phi / r0 * cot) / g.s;
    }
    g.H = g.kappa_profile + (n - 1) * g.kappa_rot;
    g.A2 = g.kappa_profile * g.kappa_profile +
           (n - 1) * g.kappa_rot * g.kappa_rot;
  } else {
    g.H = g.kappa_profile;
    g.A2 = g.kappa_profile * g.kappa_profile;
  }
  return g;
}

/// cot(phi) per node (zero where unused).
inline std::vector<double> cotangents(const RadialGraph& g) {
  std::vector<double> c(g.size(), 0.0);
  if (g.mode != Mode::kAxisym) return c;
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    const double phi = g.angle(i);
    c[i] = std::cos(phi) / std::sin(phi);
  }
  return c;
}

}  // namespace starflow::detail
