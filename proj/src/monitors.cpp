#include "starflow/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "geometry_kernels.hpp"
#include "starflow/error.hpp"
#include "starflow/flow.hpp"
#include "starflow/parallel.hpp"

namespace starflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Central difference of a nodal field with the same ghost rules as r.
double d_phi(Mode mode, std::span<const double> v, std::size_t i, double h) {
  double vm, vp;
  detail::neighbours(mode, v, i, vm, vp);
  return (vp - vm) / (2.0 * h);
}

double d_phiphi(Mode mode, std::span<const double> v, std::size_t i, double h) {
  double vm, vp;
  detail::neighbours(mode, v, i, vm, vp);
  return (vp - 2.0 * v[i] + vm) / (h * h);
}

void require_same_grid(const RadialGraph& a, const RadialGraph& b) {
  if (a.n != b.n || a.mode != b.mode || a.size() != b.size())
    throw Error(ErrorCode::kInvalidArgument, "window states live on different grids");
}

}  // namespace

Ladder default_ladder(double initial_max_H) {
  const double h0 = initial_max_H;
  return {0.5 * h0, h0, 2.0 * h0, 3.0 * h0};
}

std::vector<double> compute_F(const SurfaceFrame& f, double t, double a1, double a2) {
  std::vector<double> F(f.size());
  const double c = a2 + 2.0 * a1 * t;
  for (std::size_t i = 0; i < F.size(); ++i) F[i] = a1 * f.support[i] + c * f.H[i];
  return F;
}

FWindow make_F_window(const RadialGraph& g, double delta) {
  FWindow w;
  w.before = g;
  w.centre = step(g, delta);
  w.after = step(w.centre, delta);
  return w;
}

FEvolutionResidual F_evolution_residual(const FWindow& w, double a1, double a2) {
  require_same_grid(w.before, w.centre);
  require_same_grid(w.centre, w.after);
  const double d1 = w.centre.t - w.before.t;
  const double d2 = w.after.t - w.centre.t;
  if (!(d1 > 0.0) || std::abs(d1 - d2) > 1e-9 * d1)
    throw Error(ErrorCode::kInvalidArgument, "window must be equally spaced in time");
  // RK4 on the diffusive part is stable up to roughly 0.7 (h r)^2.
  const double stable = select_dt(w.centre, 0.5, 0.5);
  if (d1 > stable * (1.0 + 1e-12))
    throw Error(ErrorCode::kWindowTooCoarse,
                "window spacing " + std::to_string(d1) + " exceeds stable step " +
                    std::to_string(stable));

  const SurfaceFrame fb = compute_frame(w.before);
  const SurfaceFrame fc = compute_frame(w.centre);
  const SurfaceFrame fa = compute_frame(w.after);
  const auto Fb = compute_F(fb, w.before.t, a1, a2);
  const auto Fc = compute_F(fc, w.centre.t, a1, a2);
  const auto Fa = compute_F(fa, w.after.t, a1, a2);

  const RadialGraph& g = w.centre;
  const std::size_t m = g.size();
  const double h = g.spacing();
  const int n = g.n;
  const bool axisym = g.mode == Mode::kAxisym;
  const auto cot = detail::cotangents(g);

  std::vector<double> res(m);
  parallel_for(m, [&](std::size_t i) {
    const double r = g.r[i];
    const double rp = fc.r_phi[i];
    const double s = fc.speed_factor[i] * r;
    const double s2 = s * s;
    const double Fp = d_phi(g.mode, Fc, i, h);
    const double Fpp = d_phiphi(g.mode, Fc, i, h);
    const double rt = (w.after.r[i] - w.before.r[i]) / (d1 + d2);
    const double Ft = (Fa[i] - Fb[i]) / (d1 + d2) - rt * rp * Fp / s2;

    double lap;
    if (detail::is_pole(g.mode, i, m)) {
      lap = n * Fpp / s2;
    } else {
      const double s_phi = rp * (r + fc.r_phiphi[i]) / s;
      lap = Fpp / s2 - Fp * s_phi / (s2 * s);
      if (axisym && n >= 2) lap += (n - 1) * (rp / r + cot[i]) * Fp / s2;
    }
    res[i] = std::abs(Ft - lap - fc.A2[i] * Fc[i]);
  });

  FEvolutionResidual out;
  out.residual = *std::max_element(res.begin(), res.end());
  out.max_F = *std::max_element(Fc.begin(), Fc.end());
  out.delta = d1;
  out.h = h;
  return out;
}

ZExtremes compute_Z_extremes(const SurfaceFrame& f, std::size_t images) {
  const std::size_t m = f.size();
  if (m < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two nodes");
  const bool axisym = f.mode == Mode::kAxisym;

  // 1 - cos psi for the azimuthal offsets psi between x and the image of y,
  // kept separate so nearby pairs do not cancel.
  std::vector<double> omc;
  if (!axisym) {
    omc = {0.0};
  } else if (f.n == 1) {
    omc = {0.0, 2.0};
  } else {
    if (images < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two images");
    omc.resize(images);
    for (std::size_t k = 0; k < images; ++k) {
      const double half = 0.5 * std::numbers::pi * static_cast<double>(k) /
                          static_cast<double>(images - 1);
      omc[k] = 2.0 * std::sin(half) * std::sin(half);
    }
    omc.back() = 2.0;
  }

  ZExtremes z;
  z.z_star.assign(m, 0.0);
  z.z_sup.assign(m, 0.0);
  parallel_for(m, [&](std::size_t i) {
    double lo = -f.lambda_max[i];
    double hi = -f.lambda_min[i];
    const double xi = f.x[i], yi = f.y[i];
    const double nx = f.nu_x[i], ny = f.nu_y[i];
    for (std::size_t j = 0; j < m; ++j) {
      const double xj = f.x[j], dx = xj - xi, dy = f.y[j] - yi;
      for (const double w : omc) {
        if (j == i && w == 0.0) continue;
        double num, den;
        if (axisym) {
          // Image of y rotated by psi about the axis; the sine component is
          // orthogonal to both X and nu(x).
          num = nx * (dx - xj * w) + ny * dy;
          den = dx * dx + 2.0 * xi * xj * w + dy * dy;
        } else {
          num = nx * dx + ny * dy;
          den = dx * dx + dy * dy;
        }
        if (!(den > 0.0)) continue;
        const double Z = 2.0 * num / den;
        lo = std::min(lo, Z);
        hi = std::max(hi, Z);
      }
    }
    z.z_star[i] = lo;
    z.z_sup[i] = hi;
  });
  return z;
}

NoncollapsingReport noncollapsing_report(const ZExtremes& z, std::span<const double> F) {
  if (F.size() != z.z_star.size())
    throw Error(ErrorCode::kInvalidArgument, "F and Z sizes differ");
  NoncollapsingReport r;
  r.z_star_over_F_min = kInf;
  r.z_sup_over_F_max = -kInf;
  for (std::size_t i = 0; i < F.size(); ++i) {
    if (!(F[i] > 0.0))
      throw Error(ErrorCode::kFNonpositive, "F <= 0 at node " + std::to_string(i));
    r.z_star_over_F_min = std::min(r.z_star_over_F_min, z.z_star[i] / F[i]);
    r.z_sup_over_F_max = std::max(r.z_sup_over_F_max, z.z_sup[i] / F[i]);
  }
  r.alpha_int = r.z_star_over_F_min < 0.0 ? -1.0 / r.z_star_over_F_min : kInf;
  r.alpha_ext = r.z_sup_over_F_max > 0.0 ? 1.0 / r.z_sup_over_F_max : kInf;
  return r;
}

Ladder convexity_profile(const SurfaceFrame& f, const Ladder& ladder) {
  Ladder out;
  out.fill(kInf);
  for (std::size_t k = 0; k < kLadderSize; ++k)
    for (std::size_t i = 0; i < f.size(); ++i)
      if (f.H[i] >= ladder[k] && f.H[i] > 0.0)
        out[k] = std::min(out[k], f.lambda_min[i] / f.H[i]);
  return out;
}

Ladder gradient_ratio(const SurfaceFrame& f, const Ladder& ladder) {
  Ladder out;
  for (std::size_t k = 0; k < kLadderSize; ++k) {
    double g = -kInf;
    for (std::size_t i = 0; i < f.size(); ++i)
      if (f.H[i] >= ladder[k] && f.H[i] > 0.0)
        g = std::max(g, f.grad_A[i] / (f.H[i] * f.H[i]));
    out[k] = g == -kInf ? kInf : g;
  }
  return out;
}

double H_lower_bound_check(const SurfaceFrame& f, double t, double D) {
  if (!(t > 0.0)) throw Error(ErrorCode::kNonpositiveTime, "H lower bound needs t > 0");
  double margin = kInf;
  for (const double H : f.H) margin = std::min(margin, H + D / (2.0 * t));
  return margin;
}

StarMonitorRecord make_record(const SurfaceFrame& f, const MonitorOptions& opt) {
  StarMonitorRecord rec;
  rec.t = f.t;
  rec.tau = f.t > 0.0 ? std::log(f.t) : -kInf;
  rec.min_H = *std::min_element(f.H.begin(), f.H.end());
  rec.max_H = *std::max_element(f.H.begin(), f.H.end());
  const auto F = compute_F(f, f.t, opt.a1, opt.a2);
  rec.min_F = *std::min_element(F.begin(), F.end());
  rec.min_support = star_gauge(f);
  if (rec.min_F > 0.0) {
    const auto nc = noncollapsing_report(compute_Z_extremes(f, opt.images), F);
    rec.z_star_over_F_min = nc.z_star_over_F_min;
    rec.z_sup_over_F_max = nc.z_sup_over_F_max;
    rec.alpha_int = nc.alpha_int;
    rec.alpha_ext = nc.alpha_ext;
  } else {
    // Ratios to F are meaningless; the minF column carries the failure.
    rec.z_star_over_F_min = rec.z_sup_over_F_max = std::nan("");
    rec.alpha_int = rec.alpha_ext = std::nan("");
  }
  rec.m = convexity_profile(f, opt.ladder);
  rec.G = gradient_ratio(f, opt.ladder);
  rec.diameter = f.diameter;
  rec.extinction_margin =
      opt.initial_diameter * opt.initial_diameter / (2.0 * f.n) - f.t;
  return rec;
}

}  // namespace starflow
