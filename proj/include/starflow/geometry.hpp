#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace starflow {

/// Symmetry reduction of a star-shaped hypersurface.
///
/// kCurve2D: a closed curve in the plane (n = 1), r(theta) on [0, 2pi),
/// periodic, N nodes theta_i = i h with h = 2pi / N.
///
/// kAxisym: an SO(n)-symmetric hypersurface in R^{n+1} about the last axis,
/// r(phi) on [0, pi] with phi measured from the +z axis. N intervals, N + 1
/// nodes phi_i = i h with h = pi / N; both poles are nodes. Profile-plane
/// coordinates are (rho, z) = r (sin phi, cos phi).
enum class Mode { kCurve2D, kAxisym };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);

struct RadialGraph {
  int n = 1;
  Mode mode = Mode::kCurve2D;
  std::vector<double> r;
  double t = 0.0;

  /// Number of grid intervals N.
  std::size_t intervals() const;
  std::size_t size() const { return r.size(); }
  double spacing() const;
  double angle(std::size_t i) const;
};

struct SphereShape {
  double radius = 1.0;
};
struct PerturbedSphereShape {
  double amplitude = 0.2;
  int frequency = 3;
  double radius = 1.0;
};
/// Curve-only; semi-axes along x and y.
struct EllipseShape {
  double a = 2.0;
  double b = 1.0;
};
/// Axisymmetric only. Two elongated lobes joined by a neck of radius
/// neck_radius at the origin; total length 5 bulb_radius. `slope` sets how
/// fast the neck opens, `taper` how quickly the lobes stop widening, and
/// `sharpness` how flat the ends are.
struct DumbbellShape {
  double bulb_radius = 1.0;
  double neck_radius = 0.15;
  double sharpness = 6.0;
  double slope = 0.3;
  double taper = 0.5;
};

using ShapeSpec =
    std::variant<SphereShape, PerturbedSphereShape, EllipseShape, DumbbellShape>;

std::string shape_name(const ShapeSpec& spec);

/// Builds the t = 0 radial graph. Curves (n = 1) use kCurve2D except for the
/// dumbbell, which is always kAxisym.
RadialGraph build_shape(const ShapeSpec& spec, int n, std::size_t N);

/// Per-node extrinsic geometry of a radial graph.
struct SurfaceFrame {
  int n = 1;
  Mode mode = Mode::kCurve2D;
  double h = 0.0;
  double t = 0.0;

  // Profile-plane coordinates, (x, y) for curves and (rho, z) otherwise.
  std::vector<double> x, y;
  std::vector<double> nu_x, nu_y;
  /// Principal curvature along the profile direction.
  std::vector<double> kappa_profile;
  /// Rotational principal curvature (multiplicity n - 1); zero for curves.
  std::vector<double> kappa_rot;
  std::vector<double> lambda_min, lambda_max;
  std::vector<double> H, A2, support;
  /// Area density per unit angle, including the omega_{n-1} rho^{n-1} factor.
  std::vector<double> dmu;
  /// Quadrature weight (1, or 1/2 at the poles).
  std::vector<double> weight;
  std::vector<double> grad_A;
  // Radial-graph data reused by monitors.
  std::vector<double> r, r_phi, r_phiphi, speed_factor;

  double diameter = 0.0;
  double beta = 0.0;

  std::size_t size() const { return H.size(); }
  /// All principal curvatures at node i, ascending.
  std::vector<double> principal_curvatures(std::size_t i) const;
  double total_area() const;
  double max_abs_A() const;
};

/// Ceiling on |r_phi| / r beyond which the radial gauge is declared broken.
inline constexpr double kGaugeCeiling = 50.0;

SurfaceFrame compute_frame(const RadialGraph& g);

/// Minimum over nodes of <X, nu>.
double star_gauge(const SurfaceFrame& f);

/// Surface area of the unit n-sphere in R^{n+1}.
double unit_sphere_area(int n);

/// Area of an arbitrary (not necessarily radial) profile given by node
/// positions on the same angular grid as `like`. Used as an independent
/// check of the first variation of area.
double parametric_area(const RadialGraph& like, std::span<const double> x,
                       std::span<const double> y);

void write_graph_csv(std::ostream& os, const RadialGraph& g);
RadialGraph read_graph_csv(std::istream& is);

}  // namespace starflow
