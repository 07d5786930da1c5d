#include "starflow/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "starflow/rescaling.hpp"

namespace starflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

RadialGraph graph_from(int n, Mode mode, std::size_t N, auto&& radius) {
  RadialGraph g;
  g.n = n;
  g.mode = mode;
  g.r.resize(mode == Mode::kCurve2D ? N : N + 1);
  for (std::size_t i = 0; i < g.r.size(); ++i) g.r[i] = radius(g.angle(i));
  return g;
}

// Max-node error of the computed principal curvatures against closed forms.
double ellipse_error(std::size_t N) {
  const double a = 2.0, b = 1.0;
  const auto g = graph_from(1, Mode::kCurve2D, N, [&](double th) {
    return a * b / std::hypot(b * std::cos(th), a * std::sin(th));
  });
  const auto f = compute_frame(g);
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double q = b * b * f.x[i] * f.x[i] / (a * a) + a * a * f.y[i] * f.y[i] / (b * b);
    const double k = a * b / std::pow(q, 1.5);
    err = std::max(err, std::abs(f.kappa_profile[i] - k));
  }
  return err;
}

double spheroid_error(std::size_t N) {
  const double a = 1.0, c = 1.5;  // rho semi-axis, z semi-axis
  const auto g = graph_from(2, Mode::kAxisym, N, [&](double ph) {
    const double s = std::sin(ph), co = std::cos(ph);
    return 1.0 / std::sqrt(s * s / (a * a) + co * co / (c * c));
  });
  const auto f = compute_frame(g);
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double st = f.x[i] / a, ct = f.y[i] / c;
    const double q = a * a * ct * ct + c * c * st * st;
    const double kp = a * c / std::pow(q, 1.5);
    const double kr = c / (a * std::sqrt(q));
    err = std::max({err, std::abs(f.kappa_profile[i] - kp), std::abs(f.kappa_rot[i] - kr)});
  }
  return err;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (const double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double curvature_refinement_ratio(std::size_t N) {
  const double curve = ellipse_error(N) / ellipse_error(2 * N);
  const double surf = spheroid_error(N) / spheroid_error(2 * N);
  return std::min(curve, surf);
}

double sphere_isotropy_defect(std::size_t N) {
  double worst = 0.0;
  for (const int n : {2, 3}) {
    const auto f = compute_frame(build_shape(SphereShape{1.3}, n, N));
    const double A = f.max_abs_A();
    for (std::size_t i = 0; i < f.size(); ++i)
      worst = std::max(worst, (f.lambda_max[i] - f.lambda_min[i]) / A);
  }
  return worst;
}

double first_variation_error(std::uint64_t seed, std::size_t N) {
  const auto g = build_shape(PerturbedSphereShape{0.1, 2, 1.0}, 2, N);
  const auto f = compute_frame(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  double c[4];
  for (double& x : c) x = coef(rng);
  std::vector<double> psi(g.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double ph = g.angle(i);
    psi[i] = c[0] + c[1] * std::cos(ph) + c[2] * std::cos(2.0 * ph) + c[3] * std::cos(3.0 * ph);
  }
  auto area = [&](double s) {
    std::vector<double> x(g.size()), y(g.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = f.x[i] + s * psi[i] * f.nu_x[i];
      y[i] = f.y[i] + s * psi[i] * f.nu_y[i];
    }
    return parametric_area(g, x, y);
  };
  const double s = 1e-4;
  const double fd = (area(s) - area(-s)) / (2.0 * s);
  double first = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) first += f.weight[i] * f.H[i] * psi[i] * f.dmu[i];
  first *= f.h;
  return std::abs(fd - first) / std::abs(first);
}

double rk4_observed_order() {
  const auto g0 = build_shape(PerturbedSphereShape{0.2, 3, 1.0}, 1, 32);
  const double dt0 = 0.5 * select_dt(g0);
  const double T = 64.0 * dt0;
  auto final_r = [&](double dt) {
    RadialGraph g = g0;
    const auto steps = static_cast<std::size_t>(std::llround(T / dt));
    for (std::size_t k = 0; k < steps; ++k) g = step(g, dt);
    return g.r;
  };
  const auto r1 = final_r(dt0), r2 = final_r(dt0 / 2), r4 = final_r(dt0 / 4);
  double d12 = 0.0, d24 = 0.0;
  for (std::size_t i = 0; i < r1.size(); ++i) {
    d12 = std::max(d12, std::abs(r1[i] - r2[i]));
    d24 = std::max(d24, std::abs(r2[i] - r4[i]));
  }
  return std::log2(d12 / d24);
}

double classifier_synthetic_residual() {
  const double t0 = 0.25;
  const std::vector<double> times = {0.2, 0.22, 0.235, 0.245};
  auto series = [&](double gap, std::vector<double> ratios) {
    std::vector<BlowupSample> s;
    for (const double t : times) {
      BlowupSample b;
      b.t = t;
      b.H = std::sqrt(gap / (t0 - t));
      b.ratios = ratios;
      s.push_back(b);
    }
    return s;
  };
  struct Case {
    int n;
    std::vector<BlowupSample> s;
    TangentFlow expect;
  };
  std::vector<Case> cases;
  cases.push_back({2, series(1.0, {0.5, 0.5}), TangentFlow::kSphere});
  cases.push_back({3, series(1.5, {1.0 / 3, 1.0 / 3, 1.0 / 3}), TangentFlow::kSphere});
  cases.push_back({2, series(0.5, {0.0, 1.0}), TangentFlow::kCylinder});
  cases.push_back({3, series(1.0, {0.0, 0.5, 0.5}), TangentFlow::kCylinder});
  cases.push_back({2, series(0.0, {0.0, 0.0}), TangentFlow::kHalfspace});
  double worst = 0.0;
  for (const auto& c : cases) {
    const auto rep = classify_samples(c.n, c.s, t0);
    if (rep.classification != c.expect) return kInf;
    worst = std::max(worst, rep.best_residual);
  }
  return worst;
}

RadialGraph rescaled_graph(const RadialGraph& g, double t0, double lambda) {
  Trajectory traj;
  traj.checkpoints.push_back({g.t, 0.0, g});
  return parabolic_rescale(traj, {0.0, 0.0}, t0, lambda).checkpoints.front().graph;
}

double frame_scaling_error(const RadialGraph& g, double t0, std::span<const double> lambdas) {
  const auto f = compute_frame(g);
  double worst = 0.0;
  for (const double lam : lambdas) {
    const auto fs = compute_frame(rescaled_graph(g, t0, lam));
    auto cmp = [&](std::span<const double> a, std::span<const double> b, double scale) {
      const double ref = max_abs(b) * std::abs(scale);
      for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i] * scale) / ref);
    };
    cmp(fs.H, f.H, 1.0 / lam);
    cmp(fs.lambda_min, f.lambda_min, 1.0 / lam);
    cmp(fs.lambda_max, f.lambda_max, 1.0 / lam);
    cmp(fs.dmu, f.dmu, std::pow(lam, g.n));
  }
  return worst;
}

double alpha_covariance_error(const RadialGraph& g, double t0, std::span<const double> lambdas,
                              double a1, double a2, std::size_t images) {
  MonitorOptions opt;
  opt.a1 = a1;
  opt.a2 = a2;
  opt.images = images;
  const auto base = make_record(compute_frame(g), opt);
  double worst = 0.0;
  for (const double lam : lambdas) {
    MonitorOptions ropt = opt;
    ropt.a2 = lam * lam * (a2 + 2.0 * a1 * t0);
    const auto rec = make_record(compute_frame(rescaled_graph(g, t0, lam)), ropt);
    auto rel = [&](double a, double b) {
      if (std::isinf(a) && std::isinf(b)) return 0.0;
      return std::abs(a - lam * lam * b) / std::abs(lam * lam * b);
    };
    worst = std::max({worst, rel(rec.alpha_int, base.alpha_int),
                      rel(rec.alpha_ext, base.alpha_ext)});
  }
  return worst;
}

double alpha_rounding_floor(const RadialGraph& g, double a1, double a2, std::size_t images,
                            std::uint64_t seed, int samples) {
  MonitorOptions opt;
  opt.a1 = a1;
  opt.a2 = a2;
  opt.images = images;
  const auto base = make_record(compute_frame(g), opt);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  constexpr double half_ulp = 0.5 * std::numeric_limits<double>::epsilon();
  auto rel = [](double a, double b) {
    if (std::isinf(a) && std::isinf(b)) return 0.0;
    return std::abs(a - b) / std::abs(b);
  };
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    RadialGraph p = g;
    for (double& r : p.r) r *= 1.0 + half_ulp * u(rng);
    const auto rec = make_record(compute_frame(p), opt);
    worst = std::max({worst, rel(rec.alpha_int, base.alpha_int), rel(rec.alpha_ext, base.alpha_ext)});
  }
  return worst;
}

}  // namespace starflow
