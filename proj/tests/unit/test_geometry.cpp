#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "starflow/checks.hpp"
#include "starflow/error.hpp"
#include "starflow/geometry.hpp"

using namespace starflow;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("build_shape: unit sphere is the constant graph") {
  const auto g = build_shape(SphereShape{1.0}, 2, 64);
  CHECK(g.mode == Mode::kAxisym);
  CHECK(g.size() == 65);
  for (const double r : g.r) CHECK(r == 1.0);
}

TEST_CASE("build_shape: perturbed circle r = 1 + a cos(k theta) with positive support") {
  const auto g = build_shape(PerturbedSphereShape{0.2, 3, 1.0}, 1, 256);
  CHECK(g.mode == Mode::kCurve2D);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g.r[i] == doctest::Approx(1.0 + 0.2 * std::cos(3.0 * g.angle(i))).epsilon(1e-15));
  CHECK(star_gauge(compute_frame(g)) > 0.0);
}

TEST_CASE("build_shape: dumbbell neck has min r = neck radius at phi = pi/2") {
  const auto g = build_shape(DumbbellShape{1.0, 0.15}, 2, 512);
  const auto it = std::min_element(g.r.begin(), g.r.end());
  CHECK(*it == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(g.angle(static_cast<std::size_t>(it - g.r.begin())) == doctest::Approx(std::numbers::pi / 2));
  const double gauge = star_gauge(compute_frame(g));
  CHECK(gauge > 0.0);
  CHECK(gauge < 0.15);
}

TEST_CASE("build_shape: error codes") {
  CHECK(code_of([] { build_shape(SphereShape{1.0}, 2, 8); }) == ErrorCode::kBadGrid);
  CHECK(code_of([] { build_shape(PerturbedSphereShape{1.5, 3, 1.0}, 1, 64); }) == ErrorCode::kNonStarShaped);
}

TEST_CASE("compute_frame: unit sphere n=2 has H=2, lambda=1, support=1, |A|^2=2, D=2") {
  const auto f = compute_frame(build_shape(SphereShape{1.0}, 2, 64));
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f.H[i] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.lambda_min[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.lambda_max[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.support[i] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f.A2[i] == doctest::Approx(2.0).epsilon(1e-12));
  }
  CHECK(f.diameter == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.total_area() == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-3));
}

TEST_CASE("compute_frame: sphere of radius 2 in n=3 has H = 3/2 and support 2") {
  const auto f = compute_frame(build_shape(SphereShape{2.0}, 3, 64));
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f.H[i] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(f.support[i] == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("compute_frame: ellipse (2,1) major vertex has curvature a/b^2 = 2 to O(h^2)") {
  const auto f = compute_frame(build_shape(EllipseShape{2.0, 1.0}, 1, 256));
  CHECK(f.x[0] == doctest::Approx(2.0));
  CHECK(f.nu_x[0] == doctest::Approx(1.0));
  CHECK(f.support[0] == doctest::Approx(2.0).epsilon(1e-12));
  const double e256 = std::abs(f.H[0] - 2.0);
  const double e512 = std::abs(compute_frame(build_shape(EllipseShape{2.0, 1.0}, 1, 512)).H[0] - 2.0);
  CHECK(e256 < 1e-2);
  CHECK(e256 / e512 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("compute_frame: curvature error decreases at second order") {
  CHECK(curvature_refinement_ratio() >= 3.5);
}

TEST_CASE("compute_frame: round spheres are isotropic at every node") {
  CHECK(sphere_isotropy_defect() <= 1e-12);
}

TEST_CASE("compute_frame: gauge ceiling signals DEGENERATE") {
  RadialGraph g = build_shape(SphereShape{1.0}, 1, 64);
  g.r[10] = 1e-3;
  g.r[11] = 0.5;
  CHECK(code_of([&] { compute_frame(g); }) == ErrorCode::kDegenerate);
}

TEST_CASE("star_gauge: unit sphere is 1; perturbed circle matches the closed-form minimum") {
  CHECK(star_gauge(compute_frame(build_shape(SphereShape{1.0}, 2, 64))) == doctest::Approx(1.0));
  double exact = 1e300;
  for (int k = 0; k < 10000; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 10000.0;
    const double r = 1.0 + 0.2 * std::cos(3.0 * th), rt = -0.6 * std::sin(3.0 * th);
    exact = std::min(exact, r * r / std::sqrt(r * r + rt * rt));
  }
  const double got = star_gauge(compute_frame(build_shape(PerturbedSphereShape{0.2, 3, 1.0}, 1, 512)));
  CHECK(got == doctest::Approx(exact).epsilon(1e-3));
}

TEST_CASE("first variation of area equals the integral of H psi") {
  for (const unsigned seed : {1u, 2u, 3u}) CHECK(first_variation_error(seed) <= 1e-3);
}

TEST_CASE("unit_sphere_area: omega_1 = 2 pi, omega_2 = 4 pi, omega_3 = 2 pi^2") {
  CHECK(unit_sphere_area(1) == doctest::Approx(2.0 * std::numbers::pi));
  CHECK(unit_sphere_area(2) == doctest::Approx(4.0 * std::numbers::pi));
  CHECK(unit_sphere_area(3) == doctest::Approx(2.0 * std::numbers::pi * std::numbers::pi));
}

TEST_CASE("graph CSV round-trips exactly") {
  auto g = build_shape(PerturbedSphereShape{0.1, 2, 1.0}, 2, 32);
  g.t = 0.0123456789012345;
  std::stringstream ss;
  write_graph_csv(ss, g);
  const auto back = read_graph_csv(ss);
  CHECK(back.n == g.n);
  CHECK(back.mode == g.mode);
  CHECK(back.t == g.t);
  CHECK(back.r == g.r);
}
