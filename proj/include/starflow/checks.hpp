#pragma once

#include <cstdint>
#include <span>

#include "starflow/flow.hpp"
#include "starflow/geometry.hpp"
#include "starflow/monitors.hpp"

namespace starflow {

/// Self-contained numerical oracles. Each returns the measured quantity that
/// the matching property compares against its tolerance.

/// Ratio of max-node curvature errors at N and 2N against closed forms: an
/// ellipse (2, 1) curve and a prolate spheroid (1, 1.5) with n = 2. Returns
/// the smaller of the two ratios.
double curvature_refinement_ratio(std::size_t N = 64);

/// max |lambda_max - lambda_min| / max|A| over round spheres of radius 1.3
/// for n = 2 and n = 3.
double sphere_isotropy_defect(std::size_t N = 128);

/// Relative mismatch between d/ds Area(X + s psi nu) at s = 0 (central
/// difference of the parametric area) and sum H psi dmu h, for a random
/// smooth psi on a perturbed n = 2 sphere.
double first_variation_error(std::uint64_t seed, std::size_t N = 512);

/// Final-time max-node differences of fixed-step runs at dt, dt/2 and dt/4
/// on a perturbed circle; returns log2 of the ratio of successive
/// differences (about 4 for RK4).
double rk4_observed_order();

/// Worst best-residual over exact sphere, cylinder and flat blowup series;
/// +inf if any series is misclassified.
double classifier_synthetic_residual();

/// g mapped by parabolic_rescale about (origin, t0).
RadialGraph rescaled_graph(const RadialGraph& g, double t0, double lambda);

/// Worst relative deviation of compute_frame(parabolic_rescale(g)) from the
/// scaling laws H / lambda, lambda_i / lambda, dmu lambda^n. Requires g.t < t0.
double frame_scaling_error(const RadialGraph& g, double t0, std::span<const double> lambdas);

/// Worst relative deviation of the implied alpha from lambda^2 alpha under
/// parabolic rescaling about (origin, t0). F with constants (a1, a2) at t
/// becomes lambda F with constants (a1, lambda^2 (a2 + 2 a1 t0)) on the
/// rescaled flow, which is the F used on the rescaled side. Requires g.t < t0.
double alpha_covariance_error(const RadialGraph& g, double t0, std::span<const double> lambdas,
                              double a1 = 1.0, double a2 = 0.0,
                              std::size_t images = kDefaultImages);

inline constexpr double kCovarianceFactors[] = {0.5, 2.0, 10.0};

/// Largest relative change of the implied alpha when every radius is
/// multiplied by 1 + u/2 * U(-1, 1): the rounding floor of any comparison
/// that re-rounds the radii, such as rescaling by a factor that is not a
/// power of two.
double alpha_rounding_floor(const RadialGraph& g, double a1 = 1.0, double a2 = 0.0,
                            std::size_t images = kDefaultImages, std::uint64_t seed = 1,
                            int samples = 4);

}  // namespace starflow
