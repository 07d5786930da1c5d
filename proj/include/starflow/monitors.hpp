#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "starflow/geometry.hpp"

namespace starflow {

inline constexpr std::size_t kLadderSize = 4;
using Ladder = std::array<double, kLadderSize>;

/// Default thresholds h*: {1/2, 1, 2, 3} times the initial max H.
Ladder default_ladder(double initial_max_H);

/// a1 <X, nu> + (a2 + 2 a1 t) H per node.
std::vector<double> compute_F(const SurfaceFrame& f, double t, double a1 = 1.0,
                              double a2 = 0.0);

/// Three states t - delta, t, t + delta of one flow (same grid).
struct FWindow {
  RadialGraph before, centre, after;
};

/// Builds a window around g by stepping forward twice with dt = delta; the
/// centre is the state one step after g.
FWindow make_F_window(const RadialGraph& g, double delta);

struct FEvolutionResidual {
  double residual = 0.0;  // max over nodes of |d_t F - Lap F - |A|^2 F|
  double max_F = 0.0;
  double delta = 0.0;
  double h = 0.0;
};

/// Residual of the F evolution equation at the window centre. The time
/// derivative follows the normal motion: the tangential drift of fixed-angle
/// nodes is removed. Throws WINDOW_TOO_COARSE if the spacing exceeds the
/// stable step of the centre state.
FEvolutionResidual F_evolution_residual(const FWindow& w, double a1 = 1.0,
                                        double a2 = 0.0);

struct ZExtremes {
  std::vector<double> z_star;  // inf over y of Z(x, y)
  std::vector<double> z_sup;   // sup over y of Z(x, y)
};

inline constexpr std::size_t kDefaultImages = 64;

/// Brute-force extremes of Z(x, y) = 2 <Y - X, nu(x)> / |Y - X|^2 over all
/// other nodes and, for kAxisym with n >= 2, `images` azimuthal copies of
/// every node on [0, pi]. The coincidence limits -lambda_max and -lambda_min
/// are included.
ZExtremes compute_Z_extremes(const SurfaceFrame& f,
                             std::size_t images = kDefaultImages);

struct NoncollapsingReport {
  double z_star_over_F_min = 0.0;
  double z_sup_over_F_max = 0.0;
  double alpha_int = 0.0;  // +inf when min Z_* / F >= 0
  double alpha_ext = 0.0;  // +inf when max Z^* / F <= 0
};

/// Throws F_NONPOSITIVE if some F <= 0.
NoncollapsingReport noncollapsing_report(const ZExtremes& z, std::span<const double> F);

/// m(h*) = min{lambda_1 / H : H >= h*}; +inf on empty sets.
Ladder convexity_profile(const SurfaceFrame& f, const Ladder& ladder);

/// G(h*) = max{|grad A| / H^2 : H >= h*}; +inf on empty sets.
Ladder gradient_ratio(const SurfaceFrame& f, const Ladder& ladder);

/// min over nodes of H + D / (2t). Requires t > 0.
double H_lower_bound_check(const SurfaceFrame& f, double t, double D);

struct StarMonitorRecord {
  double t = 0.0;
  double tau = 0.0;
  double min_H = 0.0, max_H = 0.0;
  double min_F = 0.0, min_support = 0.0;
  double z_star_over_F_min = 0.0, z_sup_over_F_max = 0.0;
  double alpha_int = 0.0, alpha_ext = 0.0;
  Ladder m{}, G{};
  double diameter = 0.0;
  double extinction_margin = 0.0;
};

struct MonitorOptions {
  double a1 = 1.0;
  double a2 = 0.0;
  Ladder ladder{};
  std::size_t images = kDefaultImages;
  /// Diameter of the initial surface; the extinction margin is
  /// D0^2 / 2n - t.
  double initial_diameter = 0.0;
};

StarMonitorRecord make_record(const SurfaceFrame& f, const MonitorOptions& opt);

}  // namespace starflow
