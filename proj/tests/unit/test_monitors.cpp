#include <doctest.h>

#include <cmath>
#include <limits>

#include "starflow/checks.hpp"
#include "starflow/error.hpp"
#include "starflow/flow.hpp"
#include "starflow/monitors.hpp"

using namespace starflow;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SurfaceFrame sphere_frame(double R, int n, std::size_t N = 64) {
  return compute_frame(build_shape(SphereShape{R}, n, N));
}

}  // namespace

TEST_CASE("compute_F: sphere closed forms") {
  const auto f0 = sphere_frame(1.0, 2);
  for (const double F : compute_F(f0, 0.0)) CHECK(F == doctest::Approx(1.0));
  const double R = std::sqrt(0.6);
  const auto f = sphere_frame(R, 2);
  for (const double F : compute_F(f, 0.1, 1.0, 0.0)) CHECK(F == doctest::Approx(R + 0.4 / R).epsilon(1e-12));
  for (const double F : compute_F(f, 0.1, 0.0, 1.0)) CHECK(F == doctest::Approx(2.0 / R).epsilon(1e-12));
  CHECK(R + 0.4 / R == doctest::Approx(1.2910).epsilon(1e-4));
}

TEST_CASE("F_evolution_residual: sphere at t=0.05 is small and falls under h-refinement") {
  double res[2], maxF = 0.0;
  int k = 0;
  for (const std::size_t N : {128u, 256u}) {
    const auto g = advance_to(build_shape(SphereShape{1.0}, 2, N), 0.05);
    const auto r = F_evolution_residual(make_F_window(g, 0.5 * select_dt(g)));
    res[k++] = r.residual;
    maxF = r.max_F;
  }
  CHECK(res[1] <= 1e-3 * maxF);
  CHECK(res[0] / res[1] >= 3.5);
}

TEST_CASE("F_evolution_residual: perturbed circle converges at order about 2") {
  const ShapeSpec shape = PerturbedSphereShape{0.1, 2, 1.0};
  const double t = 1e-3;
  const auto fine = advance_to(build_shape(shape, 1, 512), t);
  const auto coarse = advance_to(build_shape(shape, 1, 256), t);
  const double delta = 0.5 * select_dt(fine);
  const double rc = F_evolution_residual(make_F_window(coarse, delta)).residual;
  const double rf = F_evolution_residual(make_F_window(fine, delta)).residual;
  const double order = std::log2(rc / rf);
  CHECK(order >= 1.8);
  CHECK(order <= 2.3);
}

TEST_CASE("F_evolution_residual: coarse windows are rejected") {
  const auto g = build_shape(SphereShape{1.0}, 2, 64);
  bool threw = false;
  try {
    F_evolution_residual(make_F_window(g, 100.0 * select_dt(g)));
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kWindowTooCoarse;
  }
  CHECK(threw);
}

TEST_CASE("compute_Z_extremes: unit circle has Z = -1 for every pair") {
  const auto z = compute_Z_extremes(sphere_frame(1.0, 1));
  for (std::size_t i = 0; i < z.z_star.size(); ++i) {
    CHECK(z.z_star[i] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(z.z_sup[i] == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("compute_Z_extremes: antipodal pair on the unit circle gives -1") {
  SurfaceFrame f;
  f.n = 1;
  f.mode = Mode::kCurve2D;
  f.x = {1.0, -1.0};
  f.y = {0.0, 0.0};
  f.nu_x = {1.0, -1.0};
  f.nu_y = {0.0, 0.0};
  f.lambda_min = f.lambda_max = {1.0, 1.0};
  f.H = {1.0, 1.0};
  const auto z = compute_Z_extremes(f);
  CHECK(z.z_star[0] == doctest::Approx(-1.0));
  CHECK(z.z_sup[0] == doctest::Approx(-1.0));
}

TEST_CASE("compute_Z_extremes: sphere of radius 2 in n=2 gives -1/2") {
  const auto z = compute_Z_extremes(sphere_frame(2.0, 2, 32), 32);
  for (std::size_t i = 0; i < z.z_star.size(); ++i) {
    CHECK(std::abs(z.z_star[i] + 0.5) <= 1e-6);
    CHECK(std::abs(z.z_sup[i] + 0.5) <= 1e-6);
  }
}

TEST_CASE("noncollapsing_report: spheres and the exterior sentinel") {
  for (const double R : {1.0, 2.0}) {
    const auto f = sphere_frame(R, 2, 32);
    const auto rep = noncollapsing_report(compute_Z_extremes(f, 32), compute_F(f, 0.0));
    CHECK(rep.z_star_over_F_min == doctest::Approx(-1.0 / (R * R)).epsilon(1e-6));
    CHECK(rep.alpha_int == doctest::Approx(R * R).epsilon(1e-6));
    CHECK(rep.z_sup_over_F_max < 0.0);
    CHECK(rep.alpha_ext == kInf);
  }
}

TEST_CASE("noncollapsing_report: F <= 0 is rejected") {
  const auto f = sphere_frame(1.0, 1, 32);
  auto F = compute_F(f, 0.0);
  F[5] = 0.0;
  bool threw = false;
  try {
    noncollapsing_report(compute_Z_extremes(f), F);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kFNonpositive;
  }
  CHECK(threw);
}

TEST_CASE("convexity_profile: sphere gives 1/n; empty rungs give +inf") {
  const auto f = sphere_frame(1.0, 2);
  const auto m = convexity_profile(f, Ladder{0.5, 1.0, 2.0, 3.0});
  CHECK(m[0] == doctest::Approx(0.5));
  CHECK(m[1] == doctest::Approx(0.5));
  CHECK(m[2] == doctest::Approx(0.5));
  CHECK(m[3] == kInf);
}

TEST_CASE("convexity_profile: dumbbell neck starts with negative lambda_1") {
  const auto f = compute_frame(build_shape(DumbbellShape{1.0, 0.15}, 2, 512));
  const auto m = convexity_profile(f, Ladder{0.5, 1.0, 2.0, 3.0});
  CHECK(m[0] < 0.0);
}

TEST_CASE("gradient_ratio: sphere has G = 0") {
  const auto G = gradient_ratio(sphere_frame(1.0, 2), Ladder{0.5, 1.0, 1.5, 2.0});
  for (const double g : G) CHECK(std::abs(g) <= 1e-10);
}

TEST_CASE("gradient_ratio: top rung converges under N -> 2N") {
  const ShapeSpec shape = PerturbedSphereShape{0.2, 3, 1.0};
  const auto f1 = compute_frame(build_shape(shape, 1, 512));
  const auto f2 = compute_frame(build_shape(shape, 1, 1024));
  const Ladder ladder = default_ladder(*std::max_element(f1.H.begin(), f1.H.end()));
  const Ladder low{ladder[0], ladder[0], ladder[0], ladder[0]};
  const double g1 = gradient_ratio(f1, low)[3], g2 = gradient_ratio(f2, low)[3];
  CHECK(std::abs(g2 - g1) <= 0.1 * std::abs(g2));
}

TEST_CASE("H_lower_bound_check: positive on the dumbbell, negative on a constructed violation") {
  const auto g = advance_to(build_shape(DumbbellShape{1.0, 0.15}, 2, 256), 1e-5);
  const auto f = compute_frame(g);
  CHECK(H_lower_bound_check(f, g.t, f.diameter) > 0.0);
  SurfaceFrame bad;
  const double D = 2.0, t = 0.1;
  bad.H = {1.0, -D / t, 0.5};
  CHECK(H_lower_bound_check(bad, t, D) == doctest::Approx(-D / (2.0 * t)));
}

TEST_CASE("alpha is covariant under parabolic rescaling") {
  const auto g = build_shape(PerturbedSphereShape{0.2, 3, 1.0}, 2, 128);
  CHECK(alpha_covariance_error(g, 0.1, kCovarianceFactors) <= 1e-10);
  const auto c = build_shape(PerturbedSphereShape{0.2, 3, 1.0}, 1, 256);
  CHECK(alpha_covariance_error(c, 0.1, kCovarianceFactors, 1.0, 0.5) <= 1e-10);
}

TEST_CASE("default_ladder is {1/2, 1, 2, 3} times the initial max H") {
  const auto l = default_ladder(4.0);
  CHECK(l == Ladder{2.0, 4.0, 8.0, 12.0});
}
