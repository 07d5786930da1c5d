#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starflow/flow.hpp"
#include "starflow/geometry.hpp"

namespace starflow {

/// A time slice seen in the continuously rescaled picture X / sqrt(t).
struct RescaledFrame {
  int n = 1;
  Mode mode = Mode::kCurve2D;
  double h = 0.0;
  double t = 0.0;
  double tau = 0.0;
  std::vector<double> x, y;  // rescaled profile coordinates
  std::vector<double> nu_x, nu_y;
  std::vector<double> H;        // sqrt(t) H
  std::vector<double> F;        // H~ + <X~, nu> / 2
  std::vector<double> speed;    // -F~
  std::vector<double> dmu;      // dmu / t^{n/2}
  std::vector<double> weight;   // quadrature weight
  std::vector<double> abs_X;    // |X~|
  double max_abs_X = 0.0;

  std::size_t size() const { return H.size(); }
};

/// Throws NONPOSITIVE_TIME for t <= 0.
RescaledFrame continuous_rescale(const SurfaceFrame& f, double t);

/// Fixed-order quadrature of exp(|X~|^2 / 4) dmu~. Throws OVERFLOW_GUARD if
/// |X~|^2 / 4 > 600 anywhere.
double weighted_area(const RescaledFrame& rf);

/// Weighted area of the round n-sphere of radius R about the origin.
double sphere_weighted_area(int n, double R);

struct OneSidedResult {
  double radius = 0.0;
  double slice_area = 0.0;
  double encloser_area = 0.0;
  bool pass = false;
};

/// Compares the slice with origin-centred spheres; passes when the slice
/// area is at most the encloser's, with 0.5% slack. Throws NOT_ENCLOSING
/// for a radius below max |X~|.
std::vector<OneSidedResult> one_sided_check(const RescaledFrame& rf,
                                            std::span<const double> radii);

/// (x, t) -> (lambda (x - x0), lambda^2 (t - t0)). Radial graphs are only
/// representable about the origin, so x0 must be zero. Throws EMPTY_WINDOW
/// when no checkpoint precedes t0.
Trajectory parabolic_rescale(const Trajectory& traj, std::array<double, 2> x0,
                             double t0, double lambda);

enum class TangentFlow { kHalfspace, kSphere, kCylinder, kUnresolved };

std::string_view to_string(TangentFlow c);
TangentFlow tangent_flow_from_string(std::string_view s);

/// Dimensionless data at the max-H node of one checkpoint.
struct BlowupSample {
  double t = 0.0;
  double H = 0.0;  // the scale lambda_j
  std::vector<double> ratios;  // sorted lambda_i / H
  std::size_t node = 0;
  double x = 0.0, y = 0.0;
};

struct TangentFlowReport {
  double t0 = 0.0;
  std::size_t singular_node = 0;
  double singular_x = 0.0, singular_y = 0.0;
  std::vector<double> t;
  std::vector<double> scales;
  std::vector<std::vector<double>> ratios;
  std::vector<double> h2_gap;  // H^2 (t0 - t)
  TangentFlow classification = TangentFlow::kUnresolved;
  double residual_halfspace = 0.0;
  double residual_sphere = 0.0;
  double residual_cylinder = 0.0;
  double best_residual = 0.0;
  /// Spread of the last H^2 (t0 - t) when t0 moves by +-t0_uncertainty.
  double t0_uncertainty = 0.0;
  double h2_gap_low = 0.0, h2_gap_high = 0.0;
};

inline constexpr double kClassifyThreshold = 0.1;
inline constexpr double kBlowupGrowth = 10.0;
inline constexpr std::size_t kBlowupWindow = 4;

/// Classifies a time series of blowup samples (at least 4, times below t0).
/// Residuals are evaluated at the last sample.
TangentFlowReport classify_samples(int n, std::span<const BlowupSample> samples,
                                   double t0);

BlowupSample blowup_sample(const SurfaceFrame& f);

/// Uses the last kBlowupWindow checkpoints before t0. Throws NO_BLOWUP when
/// the final max H is below 10 times the initial one. `t0_residual` is the
/// relative fit residual used for the sensitivity band.
TangentFlowReport classify_tangent_flow(const Trajectory& traj, double t0,
                                        double t0_residual = 0.0);

}  // namespace starflow
