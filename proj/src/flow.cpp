#include "starflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geometry_kernels.hpp"
#include "starflow/error.hpp"
#include "starflow/parallel.hpp"

namespace starflow {

namespace {

void require(bool ok, const char* field, const char* msg) {
  if (!ok) throw Error(ErrorCode::kValidationError, std::string(field) + ": " + msg);
}

/// Reusable buffers for evaluating the radial velocity field.
class VelocityField {
 public:
  explicit VelocityField(const RadialGraph& g)
      : mode_(g.mode), n_(g.n), h_(g.spacing()), cot_(detail::cotangents(g)) {}

  struct Summary {
    double max_A2 = 0.0;
    double max_H = -INFINITY;
    double min_r = INFINITY;
  };

  Summary eval(std::span<const double> r, std::span<double> out) {
    const std::size_t m = r.size();
    a2_.resize(m);
    h_node_.resize(m);
    parallel_for(m, [&](std::size_t i) {
      double rm, rp;
      detail::neighbours(mode_, r, i, rm, rp);
      const auto ng = detail::node_geometry(mode_, n_, rm, r[i], rp, h_, cot_[i],
                                            detail::is_pole(mode_, i, m));
      out[i] = -ng.H * ng.s / r[i];
      a2_[i] = ng.A2;
      h_node_[i] = ng.H;
    });
    Summary s;
    for (std::size_t i = 0; i < m; ++i) {
      s.max_A2 = std::max(s.max_A2, a2_[i]);
      s.max_H = std::max(s.max_H, h_node_[i]);
      s.min_r = std::min(s.min_r, r[i]);
    }
    return s;
  }

 private:
  Mode mode_;
  int n_;
  double h_;
  std::vector<double> cot_;
  std::vector<double> a2_, h_node_;
};

class Rk4Stepper {
 public:
  explicit Rk4Stepper(const RadialGraph& g) : field_(g) {
    const std::size_t m = g.size();
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &tmp_}) v->resize(m);
  }

  /// Evaluates the field at `r` into k1 and returns the summary.
  VelocityField::Summary prime(std::span<const double> r) { return field_.eval(r, k1_); }

  /// Advances r in place assuming k1 holds the field at r.
  void advance(std::vector<double>& r, double dt) {
    const std::size_t m = r.size();
    for (std::size_t i = 0; i < m; ++i) tmp_[i] = r[i] + 0.5 * dt * k1_[i];
    field_.eval(tmp_, k2_);
    for (std::size_t i = 0; i < m; ++i) tmp_[i] = r[i] + 0.5 * dt * k2_[i];
    field_.eval(tmp_, k3_);
    for (std::size_t i = 0; i < m; ++i) tmp_[i] = r[i] + dt * k3_[i];
    field_.eval(tmp_, k4_);
    for (std::size_t i = 0; i < m; ++i) {
      r[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
      if (!std::isfinite(r[i]))
        throw Error(ErrorCode::kBlowup, "radial value became non-finite");
    }
  }

 private:
  VelocityField field_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }
double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

double grid_dt(const RadialGraph& g, double cfl_geom, double min_r) {
  const double hr = g.spacing() * min_r;
  return cfl_geom * hr * hr;
}

}  // namespace

void FlowConfig::validate() const {
  require(n >= 1, "n", "must be >= 1");
  require(N >= 16, "N", "must be >= 16");
  require(cfl_geom > 0.0 && cfl_geom < 1.0, "cfl_geom", "must lie in (0, 1)");
  require(cfl_curv > 0.0 && cfl_curv < 1.0, "cfl_curv", "must lie in (0, 1)");
  require(std::isfinite(stop_Amax) && stop_Amax >= 0.0, "stop_Amax", "must be positive");
  require(std::isfinite(stop_rmin) && stop_rmin >= 0.0, "stop_rmin", "must be positive");
  require(t_max >= 0.0, "t_max", "must be non-negative");
  require(monitor_every >= 1, "monitor_every", "must be >= 1");
  require(a1 + a2 > 0.0, "a1+a2", "must be positive");
  if (std::holds_alternative<EllipseShape>(shape))
    require(n == 1, "n", "ellipse fixtures require n = 1");
}

std::string_view to_string(FlowEvent e) {
  switch (e) {
    case FlowEvent::kDegenerate: return "DEGENERATE";
    case FlowEvent::kCurvatureCeiling: return "CURVATURE_CEILING";
    case FlowEvent::kRadialFloor: return "RADIAL_FLOOR";
    case FlowEvent::kTimeCeiling: return "TIME_CEILING";
    case FlowEvent::kBlowup: return "BLOWUP";
  }
  return "UNKNOWN";
}

FlowEvent flow_event_from_string(std::string_view s) {
  for (auto e : {FlowEvent::kDegenerate, FlowEvent::kCurvatureCeiling,
                 FlowEvent::kRadialFloor, FlowEvent::kTimeCeiling, FlowEvent::kBlowup})
    if (to_string(e) == s) return e;
  throw Error(ErrorCode::kParseError, "unknown event '" + std::string(s) + "'");
}

std::vector<double> radial_velocity(const RadialGraph& g) {
  std::vector<double> v(g.size());
  VelocityField(g).eval(g.r, v);
  return v;
}

double select_dt(const RadialGraph& g, double cfl_geom, double cfl_curv) {
  std::vector<double> v(g.size());
  const auto s = VelocityField(g).eval(g.r, v);
  double dt = grid_dt(g, cfl_geom, s.min_r);
  if (s.max_A2 > 0.0) dt = std::min(dt, cfl_curv / s.max_A2);
  return dt;
}

RadialGraph step(const RadialGraph& g, double dt) {
  RadialGraph out = g;
  if (dt == 0.0) return out;
  Rk4Stepper stepper(g);
  stepper.prime(out.r);
  stepper.advance(out.r, dt);
  out.t = g.t + dt;
  return out;
}

Trajectory run(const FlowConfig& cfg) {
  cfg.validate();
  RadialGraph g = build_shape(cfg.shape, cfg.n, cfg.N);
  const SurfaceFrame f0 = compute_frame(g);

  Trajectory traj;
  traj.initial_diameter = f0.diameter;
  traj.initial_max_H = max_of(f0.H);
  traj.stop_Amax = cfg.stop_Amax > 0.0 ? cfg.stop_Amax : 1000.0 / max_of(g.r);
  traj.stop_rmin = cfg.stop_rmin > 0.0 ? cfg.stop_rmin : 3.0 * g.spacing() * min_of(g.r);

  Rk4Stepper stepper(g);
  auto summary = stepper.prime(g.r);
  auto checkpoint = [&](double max_H) {
    if (!traj.checkpoints.empty() && traj.checkpoints.back().t == g.t) return;
    traj.checkpoints.push_back({g.t, max_H, g});
  };
  checkpoint(summary.max_H);
  traj.samples.push_back(g);

  constexpr double kGrowth = std::numbers::sqrt2;
  constexpr std::size_t kSigmaStep = 10;
  double h_ref = summary.max_H;
  bool sigma_set = false;

  for (;;) {
    if (g.t >= cfg.t_max) {
      traj.terminal_event = FlowEvent::kTimeCeiling;
      break;
    }
    double dt = grid_dt(g, cfg.cfl_geom, summary.min_r);
    if (summary.max_A2 > 0.0) dt = std::min(dt, cfg.cfl_curv / summary.max_A2);
    const bool last = g.t + dt >= cfg.t_max;
    if (last) dt = cfg.t_max - g.t;

    std::vector<double> next = g.r;
    try {
      stepper.advance(next, dt);
      summary = stepper.prime(next);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerate) {
        traj.terminal_event = FlowEvent::kDegenerate;
      } else if (e.code() == ErrorCode::kBlowup) {
        traj.terminal_event = FlowEvent::kBlowup;
      } else {
        throw;
      }
      traj.terminal_detail = e.what();
      // Re-prime on the last good state so the summary matches it.
      summary = stepper.prime(g.r);
      break;
    }
    g.r = std::move(next);
    g.t = last ? cfg.t_max : g.t + dt;
    ++traj.steps;

    if (traj.steps % cfg.monitor_every == 0) traj.samples.push_back(g);
    h_ref = std::min(h_ref, summary.max_H);
    if (traj.steps == kSigmaStep || summary.max_H >= kGrowth * h_ref) {
      checkpoint(summary.max_H);
      h_ref = summary.max_H;
      if (!sigma_set && traj.steps >= kSigmaStep) {
        traj.sigma = g.t;
        sigma_set = true;
      }
    }

    if (std::sqrt(summary.max_A2) >= traj.stop_Amax) {
      traj.terminal_event = FlowEvent::kCurvatureCeiling;
      break;
    }
    if (summary.min_r <= traj.stop_rmin) {
      traj.terminal_event = FlowEvent::kRadialFloor;
      break;
    }
    if (last) {
      traj.terminal_event = FlowEvent::kTimeCeiling;
      break;
    }
  }

  checkpoint(summary.max_H);
  if (traj.samples.back().t != g.t) traj.samples.push_back(g);
  if (!sigma_set) traj.sigma = g.t;

  try {
    const auto fit = estimate_singular_time(traj);
    traj.t0 = fit.t0;
    traj.t0_residual = fit.residual;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kFitFailed) throw;
  }
  return traj;
}

RadialGraph advance_to(const RadialGraph& g, double t, double cfl_geom, double cfl_curv) {
  if (!(t >= g.t)) throw Error(ErrorCode::kInvalidArgument, "target time precedes the graph");
  RadialGraph out = g;
  while (out.t < t) {
    const double dt = select_dt(out, cfl_geom, cfl_curv);
    const bool last = out.t + dt >= t;
    out = step(out, last ? t - out.t : dt);
    if (last) out.t = t;
  }
  return out;
}

SingularTimeFit fit_singular_time(std::span<const double> t, std::span<const double> max_H) {
  const std::size_t m = t.size();
  if (m != max_H.size() || m < 5)
    throw Error(ErrorCode::kFitFailed, "need at least 5 (t, max H) samples");
  // 1 / H^2 = a - b t, weighted by H^4 so every sample counts relatively.
  double sw = 0.0, st = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(max_H[i] > 0.0)) throw Error(ErrorCode::kFitFailed, "max H must be positive");
    const double w = std::pow(max_H[i], 4);
    sw += w;
    st += w * t[i];
    sy += w / (max_H[i] * max_H[i]);
  }
  const double tm = st / sw, ym = sy / sw;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = std::pow(max_H[i], 4);
    const double dt = t[i] - tm;
    stt += w * dt * dt;
    sty += w * dt * (1.0 / (max_H[i] * max_H[i]) - ym);
  }
  if (!(stt > 0.0)) throw Error(ErrorCode::kFitFailed, "degenerate sample times");
  const double b = -sty / stt;
  const double a = ym + b * tm;
  if (!(b > 0.0) || !std::isfinite(a / b))
    throw Error(ErrorCode::kFitFailed, "max H is not growing like (t0 - t)^(-1/2)");
  SingularTimeFit fit;
  fit.t0 = a / b;
  fit.scale = 1.0 / std::sqrt(b);
  fit.points = m;
  if (!(fit.t0 > t[m - 1]))
    throw Error(ErrorCode::kFitFailed, "fitted t0 precedes the data");
  double sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double model = fit.scale / std::sqrt(fit.t0 - t[i]);
    const double rel = (model - max_H[i]) / max_H[i];
    sq += rel * rel;
  }
  fit.residual = std::sqrt(sq / static_cast<double>(m));
  if (fit.residual > 0.2)
    throw Error(ErrorCode::kFitFailed, "relative fit residual exceeds 0.2");
  return fit;
}

SingularTimeFit estimate_singular_time(const Trajectory& traj) {
  constexpr std::size_t kWindow = 8;
  const auto& cps = traj.checkpoints;
  if (cps.empty()) throw Error(ErrorCode::kFitFailed, "no checkpoints");
  // Longest trailing run with strictly increasing max H, capped at the window.
  std::size_t first = cps.size() - 1;
  while (first > 0 && cps.size() - first < kWindow &&
         cps[first - 1].max_H < cps[first].max_H)
    --first;
  std::vector<double> t, H;
  for (std::size_t i = first; i < cps.size(); ++i) {
    t.push_back(cps[i].t);
    H.push_back(cps[i].max_H);
  }
  return fit_singular_time(t, H);
}

}  // namespace starflow
