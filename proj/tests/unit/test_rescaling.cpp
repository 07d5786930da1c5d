#include <doctest.h>

#include <cmath>
#include <numbers>

#include "starflow/checks.hpp"
#include "starflow/error.hpp"
#include "starflow/flow.hpp"
#include "starflow/rescaling.hpp"

using namespace starflow;

namespace {

RescaledFrame sphere_slice(std::size_t N = 128) {
  const auto f = compute_frame(build_shape(SphereShape{std::sqrt(0.6)}, 2, N));
  return continuous_rescale(f, 0.1);
}

}  // namespace

TEST_CASE("continuous_rescale: sphere slice at t=0.1") {
  const auto rf = sphere_slice();
  CHECK(rf.max_abs_X == doctest::Approx(std::sqrt(6.0)).epsilon(1e-14));
  CHECK(rf.tau == doctest::Approx(std::log(0.1)));
  const double R = std::sqrt(0.6);
  const double s = -std::sqrt(0.1) * (2.0 / R + R / 0.2);
  CHECK(s == doctest::Approx(-2.0412).epsilon(1e-4));
  for (const double v : rf.speed) CHECK(v == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("continuous_rescale: t=1 is the identity, t<=0 is rejected") {
  const auto f = compute_frame(build_shape(PerturbedSphereShape{0.1, 2, 1.0}, 1, 64));
  const auto rf = continuous_rescale(f, 1.0);
  CHECK(rf.tau == 0.0);
  CHECK(rf.x == f.x);
  CHECK(rf.y == f.y);
  bool threw = false;
  try {
    continuous_rescale(f, 0.0);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kNonpositiveTime;
  }
  CHECK(threw);
}

TEST_CASE("weighted_area: rescaled sphere slice matches omega_2 rho^2 exp(rho^2/4)") {
  const double exact = 4.0 * std::numbers::pi * 6.0 * std::exp(1.5);
  CHECK(weighted_area(sphere_slice()) == doctest::Approx(exact).epsilon(1e-3));
  CHECK(exact == doctest::Approx(337.87).epsilon(1e-3));
  CHECK(sphere_weighted_area(2, 3.0) == doctest::Approx(1073.0).epsilon(1e-4));
  CHECK(sphere_weighted_area(2, 0.0) == 0.0);
}

TEST_CASE("weighted_area: overflow guard") {
  const auto f = compute_frame(build_shape(SphereShape{1.0}, 2, 32));
  bool threw = false;
  try {
    weighted_area(continuous_rescale(f, 1e-4));
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kOverflowGuard;
  }
  CHECK(threw);
}

TEST_CASE("one_sided_check: enclosing spheres pass, smaller ones are rejected") {
  const auto rf = sphere_slice();
  const double radii[] = {3.0, rf.max_abs_X};
  const auto res = one_sided_check(rf, radii);
  CHECK(res[0].pass);
  CHECK(res[0].encloser_area == doctest::Approx(1073.0).epsilon(1e-4));
  CHECK(res[1].pass);
  CHECK(res[1].slice_area == doctest::Approx(res[1].encloser_area).epsilon(5e-3));
  const double small[] = {2.0};
  bool threw = false;
  try {
    one_sided_check(rf, small);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kNotEnclosing;
  }
  CHECK(threw);
}

TEST_CASE("parabolic_rescale: maps times and radii, normalizes the max-H scale") {
  FlowConfig cfg;
  cfg.shape = SphereShape{1.0};
  cfg.N = 64;
  cfg.monitor_every = 1000;
  const auto traj = run(cfg);
  REQUIRE(traj.t0);
  const std::size_t k = traj.checkpoints.size() - 2;
  const auto& c = traj.checkpoints[k];
  const auto out = parabolic_rescale(traj, {0.0, 0.0}, *traj.t0, c.max_H);
  const auto f = compute_frame(out.checkpoints[k].graph);
  CHECK(*std::max_element(f.H.begin(), f.H.end()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.checkpoints[k].t == doctest::Approx(c.max_H * c.max_H * (c.t - *traj.t0)));
}

TEST_CASE("parabolic_rescale: error codes") {
  Trajectory traj;
  traj.checkpoints.push_back({0.5, 1.0, build_shape(SphereShape{1.0}, 1, 32)});
  auto code = [&](double t0, double lam) {
    try {
      parabolic_rescale(traj, {0.0, 0.0}, t0, lam);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidArgument;
  };
  CHECK(code(0.1, 2.0) == ErrorCode::kEmptyWindow);
  CHECK(code(1.0, 0.0) == ErrorCode::kInvalidArgument);
}

TEST_CASE("frame quantities scale with the rescaling factor") {
  const auto g = build_shape(PerturbedSphereShape{0.2, 3, 1.0}, 2, 128);
  CHECK(frame_scaling_error(g, 0.1, kCovarianceFactors) <= 1e-10);
}

TEST_CASE("classify_samples: synthetic sphere, cylinder and halfspace data") {
  CHECK(classifier_synthetic_residual() < 1e-6);
}

TEST_CASE("classify_samples: flat data is a halfspace, fewer than four samples is an error") {
  std::vector<BlowupSample> s;
  for (const double t : {0.1, 0.15, 0.2, 0.22}) s.push_back({t, 1e-9, {0.0, 0.0}, 0, 0.0, 0.0});
  CHECK(classify_samples(2, s, 0.25).classification == TangentFlow::kHalfspace);
  s.pop_back();
  bool threw = false;
  try {
    classify_samples(2, s, 0.25);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kEmptyWindow;
  }
  CHECK(threw);
}

TEST_CASE("classify_tangent_flow: shrinking sphere is SPHERE with H^2 (t0 - t) = n/2") {
  FlowConfig cfg;
  cfg.shape = SphereShape{1.0};
  cfg.N = 64;
  cfg.monitor_every = 1000;
  cfg.stop_rmin = 0.05;
  const auto traj = run(cfg);
  REQUIRE(traj.t0);
  const auto rep = classify_tangent_flow(traj, *traj.t0, traj.t0_residual.value_or(0.0));
  CHECK(rep.classification == TangentFlow::kSphere);
  CHECK(rep.h2_gap.back() == doctest::Approx(1.0).epsilon(0.05));
  for (const double r : rep.ratios.back()) CHECK(r == doctest::Approx(0.5).epsilon(1e-6));
}
