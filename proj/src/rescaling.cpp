#include "starflow/rescaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "starflow/error.hpp"
#include "starflow/parallel.hpp"

namespace starflow {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kExponentGuard = 600.0;
}  // namespace

RescaledFrame continuous_rescale(const SurfaceFrame& f, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::kNonpositiveTime, "rescaling needs t > 0");
  RescaledFrame rf;
  rf.n = f.n;
  rf.mode = f.mode;
  rf.h = f.h;
  rf.t = t;
  rf.tau = std::log(t);
  const std::size_t m = f.size();
  for (auto* v : {&rf.x, &rf.y, &rf.H, &rf.F, &rf.speed, &rf.dmu, &rf.abs_X})
    v->assign(m, 0.0);
  rf.nu_x = f.nu_x;
  rf.nu_y = f.nu_y;
  rf.weight = f.weight;
  const double st = std::sqrt(t);
  const double area_scale = std::pow(t, 0.5 * f.n);
  for (std::size_t i = 0; i < m; ++i) {
    rf.x[i] = f.x[i] / st;
    rf.y[i] = f.y[i] / st;
    rf.H[i] = st * f.H[i];
    const double support = f.support[i] / st;
    rf.F[i] = rf.H[i] + 0.5 * support;
    rf.speed[i] = -rf.F[i];
    rf.dmu[i] = f.dmu[i] / area_scale;
    rf.abs_X[i] = std::hypot(rf.x[i], rf.y[i]);
    rf.max_abs_X = std::max(rf.max_abs_X, rf.abs_X[i]);
  }
  return rf;
}

double weighted_area(const RescaledFrame& rf) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rf.size(); ++i) {
    const double e = 0.25 * rf.abs_X[i] * rf.abs_X[i];
    if (e > kExponentGuard)
      throw Error(ErrorCode::kOverflowGuard, "|X|^2/4 = " + std::to_string(e));
    sum += rf.weight[i] * std::exp(e) * rf.dmu[i];
  }
  return sum * rf.h;
}

double sphere_weighted_area(int n, double R) {
  if (R == 0.0) return 0.0;
  return unit_sphere_area(n) * std::pow(R, n) * std::exp(0.25 * R * R);
}

std::vector<OneSidedResult> one_sided_check(const RescaledFrame& rf,
                                            std::span<const double> radii) {
  for (const double R : radii)
    if (R < rf.max_abs_X * (1.0 - 1e-12))
      throw Error(ErrorCode::kNotEnclosing,
                  "radius " + std::to_string(R) + " < max |X| " + std::to_string(rf.max_abs_X));
  const double slice = weighted_area(rf);
  std::vector<OneSidedResult> out;
  for (const double R : radii) {
    OneSidedResult r;
    r.radius = R;
    r.slice_area = slice;
    r.encloser_area = sphere_weighted_area(rf.n, R);
    r.pass = slice <= 1.005 * r.encloser_area;
    out.push_back(r);
  }
  return out;
}

Trajectory parabolic_rescale(const Trajectory& traj, std::array<double, 2> x0,
                             double t0, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
  if (x0[0] != 0.0 || x0[1] != 0.0)
    throw Error(ErrorCode::kInvalidArgument, "radial graphs rescale about the origin only");
  const bool any = std::any_of(traj.checkpoints.begin(), traj.checkpoints.end(),
                               [&](const Checkpoint& c) { return c.t < t0; });
  if (!any) throw Error(ErrorCode::kEmptyWindow, "no checkpoint before t0");

  const double l2 = lambda * lambda;
  Trajectory out = traj;
  auto map_graph = [&](RadialGraph& g) {
    for (double& r : g.r) r *= lambda;
    g.t = l2 * (g.t - t0);
  };
  for (auto& c : out.checkpoints) {
    map_graph(c.graph);
    c.t = c.graph.t;
    c.max_H /= lambda;
  }
  for (auto& g : out.samples) map_graph(g);
  out.sigma = l2 * (traj.sigma - t0);
  out.stop_Amax /= lambda;
  out.stop_rmin *= lambda;
  out.initial_diameter *= lambda;
  out.initial_max_H /= lambda;
  if (traj.t0) out.t0 = l2 * (*traj.t0 - t0);
  return out;
}

std::string_view to_string(TangentFlow c) {
  switch (c) {
    case TangentFlow::kHalfspace: return "HALFSPACE";
    case TangentFlow::kSphere: return "SPHERE";
    case TangentFlow::kCylinder: return "CYLINDER";
    case TangentFlow::kUnresolved: return "UNRESOLVED";
  }
  return "UNRESOLVED";
}

TangentFlow tangent_flow_from_string(std::string_view s) {
  for (auto c : {TangentFlow::kHalfspace, TangentFlow::kSphere, TangentFlow::kCylinder,
                 TangentFlow::kUnresolved})
    if (to_string(c) == s) return c;
  throw Error(ErrorCode::kParseError, "unknown classification '" + std::string(s) + "'");
}

BlowupSample blowup_sample(const SurfaceFrame& f) {
  BlowupSample s;
  s.t = f.t;
  s.node = static_cast<std::size_t>(std::max_element(f.H.begin(), f.H.end()) - f.H.begin());
  s.H = f.H[s.node];
  s.x = f.x[s.node];
  s.y = f.y[s.node];
  s.ratios = f.principal_curvatures(s.node);
  for (double& v : s.ratios) v /= s.H;
  return s;
}

TangentFlowReport classify_samples(int n, std::span<const BlowupSample> samples, double t0) {
  if (samples.size() < kBlowupWindow)
    throw Error(ErrorCode::kEmptyWindow, "need at least 4 blowup samples");
  TangentFlowReport rep;
  rep.t0 = t0;
  for (const auto& s : samples) {
    if (!(s.t < t0)) throw Error(ErrorCode::kEmptyWindow, "sample at or after t0");
    rep.t.push_back(s.t);
    rep.scales.push_back(s.H);
    rep.ratios.push_back(s.ratios);
    rep.h2_gap.push_back(s.H * s.H * (t0 - s.t));
  }
  const BlowupSample& last = samples.back();
  rep.singular_node = last.node;
  rep.singular_x = last.x;
  rep.singular_y = last.y;
  const double q = rep.h2_gap.back();
  const auto& lam = last.ratios;

  // Sphere: every ratio 1/n, H^2 (t0 - t) = n/2.
  double sph = std::abs(q - 0.5 * n) / (0.5 * n);
  for (const double v : lam) sph = std::max(sph, std::abs(v - 1.0 / n));
  rep.residual_sphere = sph;

  // Cylinder R^1 x S^{n-1}: one ratio 0, the rest 1/(n-1), (n-1)/2.
  if (n >= 2 && !lam.empty()) {
    double cyl = std::abs(q - 0.5 * (n - 1)) / (0.5 * (n - 1));
    cyl = std::max(cyl, std::abs(lam.front()));
    for (std::size_t i = 1; i < lam.size(); ++i)
      cyl = std::max(cyl, std::abs(lam[i] - 1.0 / (n - 1)));
    rep.residual_cylinder = cyl;
  } else {
    rep.residual_cylinder = kInf;
  }

  // Halfspace: the curvature scale stays bounded, so H^2 (t0 - t) -> 0,
  // measured against the smallest shrinker value.
  const double unit = n >= 2 ? 0.5 * (n - 1) : 0.5;
  rep.residual_halfspace = std::abs(q) / unit;

  rep.best_residual = std::min({rep.residual_sphere, rep.residual_cylinder,
                                rep.residual_halfspace});
  if (rep.best_residual > kClassifyThreshold) {
    rep.classification = TangentFlow::kUnresolved;
  } else if (rep.best_residual == rep.residual_halfspace) {
    rep.classification = TangentFlow::kHalfspace;
  } else if (rep.best_residual == rep.residual_sphere) {
    rep.classification = TangentFlow::kSphere;
  } else {
    rep.classification = TangentFlow::kCylinder;
  }
  rep.h2_gap_low = rep.h2_gap_high = q;
  return rep;
}

TangentFlowReport classify_tangent_flow(const Trajectory& traj, double t0,
                                        double t0_residual) {
  if (traj.checkpoints.empty()) throw Error(ErrorCode::kEmptyWindow, "no checkpoints");
  std::vector<const Checkpoint*> window;
  for (const auto& c : traj.checkpoints)
    if (c.t < t0) window.push_back(&c);
  if (window.size() < kBlowupWindow)
    throw Error(ErrorCode::kEmptyWindow, "fewer than 4 checkpoints before t0");
  window.erase(window.begin(), window.end() - kBlowupWindow);

  const double h_initial = traj.checkpoints.front().max_H;
  const double h_last = window.back()->max_H;
  if (h_last < kBlowupGrowth * h_initial)
    throw Error(ErrorCode::kNoBlowup, "max H grew only by " + std::to_string(h_last / h_initial));

  std::vector<BlowupSample> samples(window.size());
  parallel_for(window.size(), [&](std::size_t k) {
    samples[k] = blowup_sample(compute_frame(window[k]->graph));
  });
  TangentFlowReport rep = classify_samples(traj.checkpoints.front().graph.n, samples, t0);

  const double t_last = samples.back().t;
  const double h2 = samples.back().H * samples.back().H;
  rep.t0_uncertainty = std::abs(t0_residual) * (t0 - t_last);
  rep.h2_gap_low = h2 * (t0 - rep.t0_uncertainty - t_last);
  rep.h2_gap_high = h2 * (t0 + rep.t0_uncertainty - t_last);
  return rep;
}

}  // namespace starflow
