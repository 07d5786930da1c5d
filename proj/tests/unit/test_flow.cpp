#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "starflow/checks.hpp"
#include "starflow/error.hpp"
#include "starflow/flow.hpp"

using namespace starflow;

TEST_CASE("step: sphere radius follows sqrt(R0^2 - 2nt)") {
  const auto g = step(build_shape(SphereShape{1.0}, 2, 64), 1e-4);
  CHECK(g.t == 1e-4);
  for (const double r : g.r) CHECK(std::abs(r - std::sqrt(1.0 - 4e-4)) <= 1e-10);
}

TEST_CASE("step: zero step leaves the graph unchanged") {
  const auto g0 = build_shape(SphereShape{1.0}, 1, 64);
  const auto g1 = step(g0, 0.0);
  CHECK(g1.r == g0.r);
}

TEST_CASE("step: avoidance with inscribed and circumscribed circles") {
  const auto g0 = build_shape(PerturbedSphereShape{0.05, 2, 1.0}, 1, 128);
  const double dt = select_dt(g0);
  const auto g1 = step(g0, dt);
  const double rmax0 = *std::max_element(g0.r.begin(), g0.r.end());
  const double rmin0 = *std::min_element(g0.r.begin(), g0.r.end());
  const double rmax1 = *std::max_element(g1.r.begin(), g1.r.end());
  const double rmin1 = *std::min_element(g1.r.begin(), g1.r.end());
  CHECK(rmax1 < rmax0);
  // Circles about the origin shrink by the exact circle law r^2 - 2t.
  CHECK(rmax1 <= std::sqrt(rmax0 * rmax0 - 2.0 * dt) + 1e-12);
  CHECK(rmin1 >= std::sqrt(rmin0 * rmin0 - 2.0 * dt) - 1e-12);
}

TEST_CASE("step: non-finite radii signal BLOWUP") {
  auto g = build_shape(SphereShape{1.0}, 1, 64);
  bool threw = false;
  try {
    step(g, 1e6);
  } catch (const Error& e) {
    threw = true;
    CHECK((e.code() == ErrorCode::kBlowup || e.code() == ErrorCode::kDegenerate ||
           e.code() == ErrorCode::kNonStarShaped));
  }
  CHECK(threw);
}

TEST_CASE("select_dt: grid-limited on the unit sphere at N=64") {
  const auto g = build_shape(SphereShape{1.0}, 2, 64);
  const double h = g.spacing();
  CHECK(select_dt(g, 0.2, 0.2) == doctest::Approx(std::min(0.2 * h * h, 0.2 / 2.0)));
  CHECK(select_dt(g, 0.2, 0.2) == doctest::Approx(0.2 * h * h));
}

TEST_CASE("select_dt: decreases monotonically as curvature grows") {
  double prev = 1e300;
  for (const double R : {1.0, 0.5, 0.1, 0.01}) {
    const double dt = select_dt(build_shape(SphereShape{R}, 2, 32));
    CHECK(dt > 0.0);
    CHECK(dt < prev);
    prev = dt;
  }
}

TEST_CASE("RK4 observed order is four") { CHECK(rk4_observed_order() >= 3.5); }

TEST_CASE("run: unit circle shrinks to extinction near t = 1/2") {
  FlowConfig cfg;
  cfg.shape = SphereShape{1.0};
  cfg.n = 1;
  cfg.N = 128;
  cfg.monitor_every = 1000;
  const auto traj = run(cfg);
  REQUIRE(traj.t0);
  CHECK(*traj.t0 == doctest::Approx(0.5).epsilon(0.01));
  CHECK(traj.checkpoints.front().t == 0.0);
  for (std::size_t k = 1; k < traj.checkpoints.size(); ++k)
    CHECK(traj.checkpoints[k].t > traj.checkpoints[k - 1].t);
}

TEST_CASE("run: t_max = 0 gives a single checkpoint and TIME_CEILING") {
  FlowConfig cfg;
  cfg.shape = SphereShape{1.0};
  cfg.N = 64;
  cfg.t_max = 0.0;
  const auto traj = run(cfg);
  CHECK(traj.terminal_event == FlowEvent::kTimeCeiling);
  CHECK(traj.checkpoints.size() == 1);
  CHECK(traj.steps == 0);
}

TEST_CASE("advance_to ends exactly at the requested time") {
  const auto g = advance_to(build_shape(SphereShape{1.0}, 2, 32), 0.01);
  CHECK(g.t == 0.01);
  CHECK(g.r[0] == doctest::Approx(std::sqrt(1.0 - 0.04)).epsilon(1e-10));
  bool threw = false;
  try {
    advance_to(g, 0.005);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kInvalidArgument;
  }
  CHECK(threw);
}

TEST_CASE("fit_singular_time: exact model recovers t0") {
  std::vector<double> t, H;
  for (const double s : {0.20, 0.21, 0.22, 0.23, 0.24}) {
    t.push_back(s);
    H.push_back(1.0 / std::sqrt(0.25 - s));
  }
  const auto fit = fit_singular_time(t, H);
  CHECK(std::abs(fit.t0 - 0.25) <= 1e-6);
  CHECK(fit.scale == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fit_singular_time: constant curvature fails") {
  const std::vector<double> t{0.1, 0.2, 0.3, 0.4, 0.5}, H{2.0, 2.0, 2.0, 2.0, 2.0};
  bool threw = false;
  try {
    fit_singular_time(t, H);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kFitFailed;
  }
  CHECK(threw);
}

TEST_CASE("FlowConfig::validate names the field") {
  FlowConfig cfg;
  cfg.a1 = 0.0;
  cfg.a2 = 0.0;
  try {
    cfg.validate();
    FAIL("expected VALIDATION_ERROR");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidationError);
    CHECK(std::string(e.what()).find("a1+a2") != std::string::npos);
  }
}
