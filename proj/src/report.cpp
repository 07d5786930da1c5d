#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "starflow/checks.hpp"
#include "starflow/error.hpp"
#include "starflow/experiment.hpp"
#include "starflow/numfmt.hpp"

namespace starflow {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using S = PropertyStatus;

const std::vector<PropertySpec> kDeclared = {
    {"radius_positive", "radial graph: r > 0 at every node"},
    {"pole_regularity", "axisymmetric graph: dr/dphi = 0 at phi = 0 and phi = pi"},
    {"unit_normal", "|nu| = 1 at every node"},
    {"curvature_storage", "H = sum lambda_i and |A|^2 = sum lambda_i^2 as stored"},
    {"area_positive", "total area sum dmu h > 0"},
    {"curvature_refinement", "N -> 2N cuts the max-node curvature error by at least 3.5"},
    {"sphere_isotropy", "round sphere: lambda_1 = ... = lambda_n within 1e-8 max|A|"},
    {"first_variation", "d/ds Area(X + s psi nu) at s = 0 equals sum H psi dmu h"},
    {"avoidance", "inside B(0, R) at t = 0 implies inside B(0, sqrt(R^2 - 2nt))"},
    {"extinction_bound", "extinction time <= D^2 / 2n (+2%)"},
    {"rk4_order", "halving dt changes the final radius by O(dt^4)"},
    {"F_positive_checkpoints", "a1 <X,nu> + (a2 + 2 a1 t) H > 0 at every checkpoint"},
    {"sphere_extinction_time", "round sphere: t0 = R0^2 / 2n"},
    {"sphere_radius_track", "round sphere: R(t) = sqrt(R0^2 - 2nt)"},
    {"F_positive_records", "F > 0 at every monitor record"},
    {"F_evolution", "dF/dt = Laplacian F + |A|^2 F"},
    {"noncollapsing_monotone", "min Z_*/F nondecreasing and max Z^*/F nonincreasing in t"},
    {"alpha_covariance", "parabolic rescaling by lambda maps alpha to lambda^2 alpha"},
    {"extinction_margin", "D0^2 / 2n - t >= 0 at every record"},
    {"blowup_growth", "max H reaches 10 x its initial value"},
    {"convexity_trend", "lambda_1 / H at large H: nondecreasing, final >= -0.05"},
    {"gradient_ratio", "|grad A| / H^2 bounded at large H (spread <= 1.5x)"},
    {"sphere_Z_oracle", "round sphere: Z_* = -1/R"},
    {"rescaled_identity", "F = 2 sqrt(t) F~ with F~ = H~ + <X~,nu>/2"},
    {"rescaled_speed_negative", "rescaled speed -(H~ + <X~,nu>/2) < 0 for t >= sigma"},
    {"foliation", "round sphere: max|X~| strictly decreasing in tau"},
    {"frame_scaling", "rescaling by lambda: H -> H/lambda, lambda_i -> lambda_i/lambda, dmu -> lambda^n dmu"},
    {"classifier_synthetic", "exact sphere, cylinder and plane series classify with residual < 1e-6"},
    {"tangent_flow", "tangent flow is a static plane, a round sphere or a round cylinder"},
    {"weighted_area_sphere", "round slice: integral of exp(|x|^2/4) dmu = omega_n rho^n exp(rho^2/4)"},
    {"one_sided_minimization", "Area_w(slice) <= Area_w(enclosing sphere)"},
    {"arrival_boundary", "v_eps = 0 on the boundary of the rescaled slice"},
    {"arrival_positive_decreasing", "v_eps > 0 inside and decreasing in |x|"},
    {"arrival_equation_identity", "regularized equation <=> F~_eps = 1/sqrt(eps^2 + |Dv|^2) at tau = log sigma"},
    {"arrival_lipschitz", "|Dv_eps| bounded uniformly in eps (ladder ratio <= 1.25)"},
    {"arrival_alpha_witness", "liminf alpha_eps >= alpha, alpha_eps nondecreasing within 5%"},
    {"arrival_convergence", "v_eps -> v uniformly as eps -> 0"},
    {"arrival_translator", "graph(v_eps / eps) is a translator of the rescaled flow"},
    {"arrival_envelope", "c dist <= v_eps <= c^-1 dist with c > 0 uniform in eps"},
    {"arrival_refinement", "M -> 2M changes ||v_eps - v|| by < 1e-3"},
    {"determinism", "identical config gives byte-identical monitors.csv at any thread count"},
    {"report_completeness", "every declared property appears exactly once"},
};

const char* anchor_of(std::string_view name) {
  for (const auto& p : kDeclared)
    if (name == p.name) return p.anchor;
  return "";
}

class Builder {
 public:
  explicit Builder(std::string experiment) { rep_.experiment = std::move(experiment); }

  void add(const char* name, S status, double measured, double tol, std::optional<std::size_t> index,
           std::string detail) {
    if (status == S::kFail && !index) index = 0;
    rep_.properties.push_back(
        {name, anchor_of(name), status, measured, tol, index, std::move(detail)});
  }
  void pass_if(const char* name, bool ok, double measured, double tol, std::size_t index,
               std::string detail = {}) {
    add(name, ok ? S::kPass : S::kFail, measured, tol, ok ? std::nullopt : std::optional(index),
        std::move(detail));
  }
  void skip(const char* name, std::string why) { add(name, S::kSkip, 0.0, 0.0, std::nullopt, std::move(why)); }

  PropertyReport& report() { return rep_; }

 private:
  PropertyReport rep_;
};

std::vector<std::vector<double>> read_csv(const fs::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingArtifact, path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell));
    if (row.size() != columns) throw Error(ErrorCode::kParseError, path.string() + ": bad row");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string series(std::span<const double> v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s + "]";
}

struct FlowData {
  ExperimentConfig cfg;
  Trajectory traj;
  std::vector<SurfaceFrame> frames;  // one per checkpoint
  std::vector<StarMonitorRecord> records;
  Json events;
  bool evolves = false;  // more than the initial checkpoint
};

std::size_t sigma_checkpoint(const Trajectory& traj) {
  for (std::size_t k = 0; k < traj.checkpoints.size(); ++k)
    if (traj.checkpoints[k].t == traj.sigma) return k;
  return std::min<std::size_t>(1, traj.checkpoints.size() - 1);
}

// Indices of the last kBlowupWindow checkpoints before t0.
std::vector<std::size_t> blowup_window(const Trajectory& traj) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < traj.checkpoints.size(); ++k)
    if (!traj.t0 || traj.checkpoints[k].t < *traj.t0) idx.push_back(k);
  if (idx.size() > kBlowupWindow) idx.erase(idx.begin(), idx.end() - kBlowupWindow);
  return idx;
}

void geometry_properties(Builder& b, const FlowData& d) {
  const auto& cps = d.traj.checkpoints;
  double rmin = kInf, pole = 0.0, normal = 0.0, storage = 0.0, area = kInf;
  std::size_t at_r = 0, at_pole = 0, at_nu = 0, at_st = 0, at_area = 0;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const auto& g = cps[k].graph;
    const auto& f = d.frames[k];
    const double r = *std::min_element(g.r.begin(), g.r.end());
    if (r < rmin) rmin = r, at_r = k;
    if (g.mode == Mode::kAxisym) {
      const double scale = *std::max_element(g.r.begin(), g.r.end());
      const double p = std::max(std::abs(f.r_phi.front()), std::abs(f.r_phi.back())) / scale;
      if (p > pole) pole = p, at_pole = k;
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double nu = std::abs(std::hypot(f.nu_x[i], f.nu_y[i]) - 1.0);
      if (nu > normal) normal = nu, at_nu = k;
      const double m = f.n - 1.0;
      const double H = f.kappa_profile[i] + m * f.kappa_rot[i];
      const double A2 = f.kappa_profile[i] * f.kappa_profile[i] + m * f.kappa_rot[i] * f.kappa_rot[i];
      const double e = std::max(std::abs(f.H[i] - H) / std::max(1.0, std::abs(H)),
                                std::abs(f.A2[i] - A2) / std::max(1.0, A2));
      if (e > storage) storage = e, at_st = k;
    }
    const double a = f.total_area();
    if (a < area) area = a, at_area = k;
  }
  b.pass_if("radius_positive", rmin > 0.0, rmin, 0.0, at_r, "min r over checkpoints");
  if (cps.front().graph.mode == Mode::kAxisym) {
    b.pass_if("pole_regularity", pole <= 1e-12, pole, 1e-12, at_pole, "max |r_phi| / max r at the poles");
  } else {
    b.skip("pole_regularity", "periodic curve has no poles");
  }
  b.pass_if("unit_normal", normal <= 1e-12, normal, 1e-12, at_nu);
  b.pass_if("curvature_storage", storage <= 1e-14, storage, 1e-14, at_st);
  b.pass_if("area_positive", area > 0.0, area, 0.0, at_area);

  const double ratio = curvature_refinement_ratio();
  b.pass_if("curvature_refinement", ratio >= 3.5, ratio, 3.5, 0,
            "ellipse (2, 1) curve and spheroid (1, 1.5), N = 64 -> 128");
  const double iso = sphere_isotropy_defect();
  b.pass_if("sphere_isotropy", iso <= 1e-8, iso, 1e-8, 0, "radius 1.3, n = 2 and 3");
  const double fv = first_variation_error(d.cfg.seed);
  b.pass_if("first_variation", fv <= 1e-4, fv, 1e-4, 0,
            "seed " + std::to_string(d.cfg.seed) + ", perturbed sphere n = 2, N = 512");
}

void flow_properties(Builder& b, const FlowData& d) {
  const auto& fc = *d.cfg.flow;
  const auto& cps = d.traj.checkpoints;
  const double R = *std::max_element(cps.front().graph.r.begin(), cps.front().graph.r.end());
  const double h = cps.front().graph.spacing();

  if (d.evolves) {
    double excess = -kInf;
    std::size_t at = 0;
    for (std::size_t k = 0; k < cps.size(); ++k) {
      const double rad2 = R * R - 2.0 * fc.n * cps[k].t;
      const double rmax = *std::max_element(cps[k].graph.r.begin(), cps[k].graph.r.end());
      const double e = rad2 > 0.0 ? rmax - std::sqrt(rad2) : kInf;
      if (e > excess) excess = e, at = k;
    }
    const double tol = h * h * R;
    b.pass_if("avoidance", excess <= tol, excess, tol, at,
              "max r - sqrt(R^2 - 2nt) over checkpoints, R = max r0 = " + format_double(R));

    const double bound = d.traj.initial_diameter * d.traj.initial_diameter / (2.0 * fc.n);
    const double ratio = cps.back().t / bound;
    b.pass_if("extinction_bound", ratio <= 1.02, ratio, 1.02, cps.size() - 1,
              "terminal t / (D0^2 / 2n), D0 = " + format_double(d.traj.initial_diameter));
  } else {
    b.skip("avoidance", "no time evolution");
    b.skip("extinction_bound", "no time evolution");
  }

  const double order = rk4_observed_order();
  b.pass_if("rk4_order", order >= 3.5, order, 3.5, 0, "observed order from dt, dt/2, dt/4");

  double fmin = kInf;
  std::size_t at_f = 0;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const auto F = compute_F(d.frames[k], cps[k].t, fc.a1, fc.a2);
    const double m = *std::min_element(F.begin(), F.end());
    if (m < fmin) fmin = m, at_f = k;
  }
  b.pass_if("F_positive_checkpoints", fmin > 0.0, fmin, 0.0, at_f);

  const auto* sphere = std::get_if<SphereShape>(&fc.shape);
  if (!sphere) {
    b.skip("sphere_extinction_time", "not a round sphere");
    b.skip("sphere_radius_track", "not a round sphere");
    return;
  }
  const double R0 = sphere->radius;
  const double T = R0 * R0 / (2.0 * fc.n);
  if (!d.evolves) {
    b.skip("sphere_extinction_time", "no time evolution");
    b.skip("sphere_radius_track", "no time evolution");
    return;
  }
  if (!d.traj.t0 && d.traj.terminal_event == FlowEvent::kTimeCeiling) {
    b.skip("sphere_extinction_time", "run stopped by t_max before extinction");
  } else if (d.traj.t0) {
    const double rel = std::abs(*d.traj.t0 - T) / T;
    b.pass_if("sphere_extinction_time", rel <= 0.01, rel, 0.01, cps.size() - 1,
              "t0 = " + format_double(*d.traj.t0) + ", exact " + format_double(T));
  } else {
    b.add("sphere_extinction_time", S::kFail, kInf, 0.01, cps.size() - 1, "no t0 estimate");
  }
  double err = 0.0;
  std::size_t at = 0;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const double exact = std::sqrt(std::max(0.0, R0 * R0 - 2.0 * fc.n * cps[k].t));
    for (const double r : cps[k].graph.r)
      if (std::abs(r - exact) > err) err = std::abs(r - exact), at = k;
  }
  b.pass_if("sphere_radius_track", err <= 1e-3, err, 1e-3, at, "max |r - sqrt(R0^2 - 2nt)|");
}

// Highest ladder rung that is non-empty on every frame of the window.
std::optional<std::size_t> top_rung(const std::vector<const SurfaceFrame*>& frames, const Ladder& ladder) {
  for (std::size_t k = kLadderSize; k-- > 0;) {
    const bool all = std::all_of(frames.begin(), frames.end(), [&](const SurfaceFrame* f) {
      return *std::max_element(f->H.begin(), f->H.end()) >= ladder[k];
    });
    if (all) return k;
  }
  return std::nullopt;
}

void monitor_properties(Builder& b, const FlowData& d, const fs::path& dir) {
  const auto& fc = *d.cfg.flow;
  const auto& rec = d.records;
  const auto& cps = d.traj.checkpoints;

  {
    double m = kInf;
    std::optional<std::size_t> bad;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      if (!(rec[i].min_F > 0.0) && !bad) bad = i;
      m = std::min(m, rec[i].min_F);
    }
    b.pass_if("F_positive_records", !bad, bad ? rec[*bad].min_F : m, 0.0, bad.value_or(0),
              "minF column of monitors.csv");
  }

  {
    const Json fe = read_json_file(dir / "fevolution.json");
    const auto status = fe.at("status").get<std::string>();
    if (status == "SKIPPED") {
      b.skip("F_evolution", fe.at("detail").get<std::string>());
    } else if (status != "OK") {
      b.add("F_evolution", S::kFail, kInf, 1e-3, 0, fe.at("detail").get<std::string>());
    } else {
      // The residual is a discretization error: it must either sit at the
      // rounding floor or shrink at second order under N/2 -> N.
      const double rel = json_double(fe.at("relative"));
      const double order = json_double(fe.at("order"));
      const bool ok = rel <= 1e-6 || order >= 1.8;
      b.pass_if("F_evolution", ok, order, 1.8, 0,
                "order N/2 -> N, residual / max F = " + format_double(rel) + " (floor 1e-6) at t = " +
                    format_double(json_double(fe.at("t"))));
    }
  }

  if (rec.size() < 2) {
    b.skip("noncollapsing_monotone", "fewer than two records");
  } else {
    const double s0 = std::abs(rec.front().z_star_over_F_min);
    const double u0 = std::abs(rec.front().z_sup_over_F_max);
    double worst = 0.0;
    std::optional<std::size_t> bad;
    for (std::size_t i = 1; i < rec.size(); ++i) {
      const double drop = (rec[i - 1].z_star_over_F_min - rec[i].z_star_over_F_min) / s0;
      const double rise = (rec[i].z_sup_over_F_max - rec[i - 1].z_sup_over_F_max) / u0;
      const double v = std::isnan(drop) || std::isnan(rise) ? kInf : std::max(drop, rise);
      if (v > worst) worst = v;
      if (v > 1e-3 && !bad) bad = i;
    }
    b.pass_if("noncollapsing_monotone", !bad, worst, 1e-3, bad.value_or(0),
              "worst consecutive violation / |initial value|");
  }

  {
    const std::size_t k = sigma_checkpoint(d.traj);
    const auto& g = cps[k].graph;
    const double t0 = d.traj.t0 && *d.traj.t0 > g.t ? *d.traj.t0 : g.t + 1.0;
    const double err = alpha_covariance_error(g, t0, kCovarianceFactors, fc.a1, fc.a2, d.cfg.images);
    // Rescaling by 10 re-rounds every radius, so the gate never drops below
    // twice the measured effect of that rounding on alpha.
    const double floor = alpha_rounding_floor(g, fc.a1, fc.a2, d.cfg.images, d.cfg.seed);
    const double tol = std::max(1e-10, 2.0 * floor);
    b.pass_if("alpha_covariance", err <= tol, err, tol, k,
              "checkpoint at t = " + format_double(g.t) + ", lambda in {0.5, 2, 10}, rounding floor " +
                  format_double(floor));
  }

  {
    double m = kInf;
    std::size_t at = 0;
    for (std::size_t i = 0; i < rec.size(); ++i)
      if (rec[i].extinction_margin < m) m = rec[i].extinction_margin, at = i;
    b.pass_if("extinction_margin", m >= 0.0, m, 0.0, at);
  }

  const double growth = cps.back().max_H / d.traj.initial_max_H;
  if (d.cfg.expect_tangent_flow && d.traj.terminal_event == FlowEvent::kTimeCeiling &&
      growth < kBlowupGrowth) {
    b.skip("blowup_growth", "run stopped by t_max before a blowup window (growth " + format_double(growth) + ")");
  } else if (d.cfg.expect_tangent_flow) {
    b.pass_if("blowup_growth", growth >= kBlowupGrowth, growth, kBlowupGrowth, cps.size() - 1,
              "final max H / initial max H");
  } else {
    b.skip("blowup_growth", "no blowup expected by the config (growth " + format_double(growth) + ")");
  }

  if (growth < kBlowupGrowth) {
    b.skip("convexity_trend", "no blowup window");
    b.skip("gradient_ratio", "no blowup window");
  } else {
    const auto idx = blowup_window(d.traj);
    std::vector<const SurfaceFrame*> frames;
    for (const auto k : idx) frames.push_back(&d.frames[k]);
    const Ladder ladder = *d.cfg.ladder;
    const auto rung = top_rung(frames, ladder);
    if (idx.size() < kBlowupWindow || !rung) {
      b.skip("convexity_trend", "no ladder rung resolved on the window");
      b.skip("gradient_ratio", "no ladder rung resolved on the window");
    } else {
      std::vector<double> m, G;
      for (const auto* f : frames) {
        m.push_back(convexity_profile(*f, ladder)[*rung]);
        G.push_back(gradient_ratio(*f, ladder)[*rung]);
      }
      std::optional<std::size_t> bad;
      for (std::size_t i = 1; i < m.size(); ++i)
        if (m[i] < m[i - 1] - 1e-9 && !bad) bad = idx[i];
      const bool ok = !bad && m.back() >= -0.05;
      const std::string where = "rung h*_" + std::to_string(*rung + 1) + " = " +
                                format_double(ladder[*rung]) + ", checkpoints " +
                                std::to_string(idx.front()) + ".." + std::to_string(idx.back());
      b.pass_if("convexity_trend", ok, m.back(), -0.05, bad.value_or(idx.back()),
                where + ", m = " + series(m));
      constexpr double kZero = 1e-6;
      const double gmax = *std::max_element(G.begin(), G.end());
      const double gmin = *std::min_element(G.begin(), G.end());
      const double spread = gmax <= kZero ? 1.0 : gmax / std::max(gmin, kZero);
      const auto at = idx[std::max_element(G.begin(), G.end()) - G.begin()];
      b.pass_if("gradient_ratio", spread <= 1.5, spread, 1.5, at, where + ", G = " + series(G));
    }
  }

  if (!std::holds_alternative<SphereShape>(fc.shape)) {
    b.skip("sphere_Z_oracle", "not a round sphere");
  } else {
    double err = 0.0;
    std::size_t at = 0;
    for (std::size_t k = 0; k < cps.size(); ++k) {
      const auto z = compute_Z_extremes(d.frames[k], d.cfg.images);
      for (std::size_t i = 0; i < z.z_star.size(); ++i) {
        const double R = cps[k].graph.r[i];
        const double e = std::abs(z.z_star[i] + 1.0 / R) * R;
        if (e > err) err = e, at = k;
      }
    }
    b.pass_if("sphere_Z_oracle", err <= 1e-6, err, 1e-6, at, "max |Z_* + 1/R| R over checkpoints");
  }
}

void rescaling_properties(Builder& b, const FlowData& d, const fs::path& dir) {
  const auto& fc = *d.cfg.flow;
  const auto rows = read_csv(dir / "rescaled.csv", 6);
  const bool sphere = std::holds_alternative<SphereShape>(fc.shape);
  if (rows.empty()) {
    b.skip("rescaled_identity", "no records at or after sigma");
    b.skip("rescaled_speed_negative", "no records at or after sigma");
    b.skip("foliation", "no records at or after sigma");
  } else {
    double idmax = 0.0, speed = -kInf;
    std::optional<std::size_t> bad_id, bad_speed;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      idmax = std::max(idmax, rows[i][5]);
      speed = std::max(speed, rows[i][3]);
      if (!(rows[i][5] <= 1e-12) && !bad_id) bad_id = i;
      if (!(rows[i][3] < 0.0) && !bad_speed) bad_speed = i;
    }
    b.pass_if("rescaled_identity", !bad_id, idmax, 1e-12, bad_id.value_or(0), "rows of rescaled.csv");
    b.pass_if("rescaled_speed_negative", !bad_speed, speed, 0.0, bad_speed.value_or(0),
              "max rescaled speed over nodes and rows");
    if (!sphere) {
      b.skip("foliation", "not a round sphere");
    } else {
      std::optional<std::size_t> bad;
      double worst = -kInf;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const double step = rows[i][2] - rows[i - 1][2];
        worst = std::max(worst, step);
        if (!(step < 0.0) && !bad) bad = i;
      }
      if (rows.size() < 2) {
        b.skip("foliation", "fewer than two rescaled records");
      } else {
        b.pass_if("foliation", !bad, worst, 0.0, bad.value_or(0), "largest increment of max|X~|");
      }
    }
  }

  {
    const std::size_t k = sigma_checkpoint(d.traj);
    const auto& g = d.traj.checkpoints[k].graph;
    const double t0 = d.traj.t0 && *d.traj.t0 > g.t ? *d.traj.t0 : g.t + 1.0;
    const double err = frame_scaling_error(g, t0, kCovarianceFactors);
    b.pass_if("frame_scaling", err <= 1e-10, err, 1e-10, k, "lambda in {0.5, 2, 10}");
  }
  {
    const double r = classifier_synthetic_residual();
    b.pass_if("classifier_synthetic", r < 1e-6, r, 1e-6, 0);
  }

  if (!d.cfg.expect_tangent_flow) {
    b.skip("tangent_flow", "no expected classification in the config");
  } else {
    std::optional<TangentFlowReport> rep;
    std::string why;
    try {
      rep = blowup_from_run(dir);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoBlowup && e.code() != ErrorCode::kFitFailed &&
          e.code() != ErrorCode::kEmptyWindow)
        throw;
      why = e.what();
    }
    if (!rep) {
      b.skip("tangent_flow", "no blowup window: " + why);
    } else {
      const auto expect = *d.cfg.expect_tangent_flow;
      const int n = fc.n;
      const double gap = rep->h2_gap.back();
      double measured = rep->best_residual, tol = kClassifyThreshold;
      bool ok = rep->classification == expect;
      std::string detail = "classified " + std::string(to_string(rep->classification)) +
                           ", expected " + std::string(to_string(expect)) +
                           ", H^2 (t0 - t) = " + format_double(gap) + " in [" +
                           format_double(rep->h2_gap_low) + ", " + format_double(rep->h2_gap_high) + "]";
      if (expect == TangentFlow::kSphere) {
        const double target = n / 2.0;
        measured = std::abs(gap - target) / target;
        tol = 0.05;
        ok = ok && measured <= tol;
      } else if (expect == TangentFlow::kCylinder) {
        const double target = (n - 1) / 2.0;
        measured = std::abs(gap - target) / target;
        tol = 0.10;
        double small = kInf;
        for (const double r : rep->ratios.back()) small = std::min(small, std::abs(r));
        ok = ok && measured <= tol && small <= 0.05;
        detail += ", min |lambda_i / H| = " + format_double(small);
      }
      b.pass_if("tangent_flow", ok, measured, tol, d.traj.checkpoints.size() - 1, detail);
    }
  }

  const Json sl = read_json_file(dir / "slice.json");
  const auto status = sl.at("status").get<std::string>();
  if (status == "SKIPPED") {
    b.skip("weighted_area_sphere", sl.at("detail").get<std::string>());
    b.skip("one_sided_minimization", sl.at("detail").get<std::string>());
    return;
  }
  if (status != "OK") {
    b.add("weighted_area_sphere", sphere ? S::kFail : S::kSkip, kInf, 1e-3, 0, sl.at("detail").get<std::string>());
    b.add("one_sided_minimization", S::kFail, kInf, 1.005, 0, sl.at("detail").get<std::string>());
    return;
  }
  const double area = json_double(sl.at("weighted_area"));
  if (sphere && sl.contains("closed_form") && !sl.at("closed_form").is_null()) {
    const double exact = json_double(sl.at("closed_form"));
    const double rel = std::abs(area - exact) / exact;
    b.pass_if("weighted_area_sphere", rel <= 1e-3, rel, 1e-3, 0,
              "t = " + format_double(json_double(sl.at("t"))) + ", Area_w = " + format_double(area) +
                  ", closed form " + format_double(exact));
  } else {
    b.skip("weighted_area_sphere", "not a round sphere");
  }
  double worst = 0.0;
  std::optional<std::size_t> bad;
  std::string detail;
  std::size_t applicable = 0;
  const auto& enc = sl.at("enclosers");
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const auto st = enc[i].at("status").get<std::string>();
    const std::string r = format_double(json_double(enc[i].at("radius")));
    if (st == "PASS" || st == "FAIL") {
      ++applicable;
      const double ratio = json_double(enc[i].at("slice_area")) / json_double(enc[i].at("encloser_area"));
      worst = std::max(worst, ratio);
      if (st == "FAIL" && !bad) bad = i;
      detail += (detail.empty() ? "" : "; ") + std::string("R = ") + r + ": ratio " + format_double(ratio);
    } else {
      detail += (detail.empty() ? "" : "; ") + std::string("R = ") + r + ": " + st + " (not a competitor)";
    }
  }
  if (applicable == 0) {
    b.skip("one_sided_minimization", "no enclosing sphere: " + detail);
  } else {
    b.pass_if("one_sided_minimization", !bad, worst, 1.005, bad.value_or(0), detail);
  }
}

void arrival_properties(Builder& b, const Json& a) {
  const auto& rows = a.at("rows");
  const auto& ref = a.at("refinement");
  auto col = [&](const char* key) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(json_double(r.at(key)));
    return v;
  };
  const auto eps = col("eps"), sup = col("sup_error"), vb = col("v_boundary"), vmin = col("min_interior"),
             inc = col("max_increment"), res = col("residual"), target = col("residual_target"),
             tr = col("translator_defect"), Fd = col("F_defect"), clow = col("c_low"),
             chigh = col("c_high"), alpha = col("alpha"), v0 = col("v0");
  const std::size_t last = rows.size() - 1;

  {
    double m = 0.0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < vb.size(); ++i)
      if (std::abs(vb[i]) > m) m = std::abs(vb[i]), at = i;
    b.pass_if("arrival_boundary", m == 0.0, m, 0.0, at, "max |v_eps| at the boundary node");
  }
  {
    std::optional<std::size_t> bad;
    double worst = -kInf;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      worst = std::max(worst, inc[i]);
      if (!(vmin[i] > 0.0 && inc[i] < 0.0) && !bad) bad = i;
    }
    b.pass_if("arrival_positive_decreasing", !bad, worst, 0.0, bad.value_or(0),
              "largest v[i+1] - v[i]; min interior v " + series(vmin));
  }
  {
    std::optional<std::size_t> bad;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (!(res[i] <= target[i]) && !bad) bad = i;
    const double order = json_double(ref.at("F_order"));
    const double Fc = json_double(ref.at("F_coarse"));
    const bool ok = !bad && order >= 1.5 && order <= 2.5 && Fc <= 1e-3;
    b.pass_if("arrival_equation_identity", ok, order, 2.0, bad.value_or(0),
              "Newton residuals " + series(res) + " within 1e-8/eps; F~ identity defect " +
                  format_double(Fc) + " at M, refinement order " + format_double(order) + " (band 1.5..2.5)");
  }
  {
    const double ratio = json_double(a.at("grad_ratio"));
    b.pass_if("arrival_lipschitz", ratio <= 1.25, ratio, 1.25, 0, "max |Dv_eps| " + series(col("max_grad")));
  }
  {
    double worst = kInf;
    std::size_t at = 0;
    for (std::size_t i = 1; i < alpha.size(); ++i)
      if (alpha[i] / alpha[i - 1] < worst) worst = alpha[i] / alpha[i - 1], at = i;
    const bool mono = a.at("alpha_nondecreasing").get<bool>();
    const bool limit = a.at("alpha_limit_ok").get<bool>();
    b.pass_if("arrival_alpha_witness", mono && limit, worst, 0.95, mono ? last : at,
              "alpha_eps " + series(alpha) + ", smooth alpha " + format_double(json_double(a.at("alpha_smooth"))) +
                  (mono ? "" : "; decreases by more than 5% as eps decreases") +
                  (limit ? "" : "; final alpha below the smooth value"));
  }
  {
    std::optional<std::size_t> bad;
    for (std::size_t i = 1; i < sup.size(); ++i)
      if (!(sup[i] < sup[i - 1]) && !bad) bad = i;
    const double exact = json_double(a.at("problem").at("exact_v0"));
    const double gap = std::abs(v0[last] - exact);
    const bool ok = !bad && sup[last] <= 0.03 && gap <= 0.05;
    if (!bad && !ok) bad = last;
    b.pass_if("arrival_convergence", ok, sup[last], 0.03, bad.value_or(0),
              "sup errors " + series(sup) + "; |v_eps(0) - log(R0^2 / 2n sigma)| = " + format_double(gap));
  }
  {
    double worst = 0.0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (std::max(tr[i], Fd[i]) > worst) worst = std::max(tr[i], Fd[i]), at = i;
    const double order = json_double(ref.at("translator_order"));
    const bool ok = worst <= 1e-3 && order >= 1.5 && order <= 2.5;
    b.pass_if("arrival_translator", ok, worst, 1e-3, at,
              "translator defects " + series(tr) + ", F~ defects " + series(Fd) +
                  ", refinement order " + format_double(order));
  }
  {
    double m = kInf;
    std::size_t at = 0;
    for (std::size_t i = 0; i < clow.size(); ++i)
      if (clow[i] < m) m = clow[i], at = i;
    const bool ok = m > 0.0 && std::all_of(chigh.begin(), chigh.end(), [](double c) { return std::isfinite(c); });
    b.pass_if("arrival_envelope", ok, m, 0.0, at, "c_low " + series(clow) + ", c_high " + series(chigh));
  }
  {
    const double change =
        std::abs(json_double(ref.at("sup_error_fine")) - json_double(ref.at("sup_error_coarse")));
    b.pass_if("arrival_refinement", change < 1e-3, change, 1e-3, 0,
              "eps = " + format_double(json_double(ref.at("eps"))));
  }
  (void)eps;
}

void arrival_properties(Builder& b, const ExperimentConfig& cfg, const fs::path& dir) {
  if (!cfg.arrival.enabled) {
    for (const auto& p : kDeclared)
      if (std::string_view(p.name).rfind("arrival_", 0) == 0)
        b.skip(p.name, "arrival study not enabled in this config");
    return;
  }
  arrival_properties(b, read_json_file(dir / "arrival.json"));
}

}  // namespace

std::string_view to_string(PropertyStatus s) {
  switch (s) {
    case PropertyStatus::kPass: return "PASS";
    case PropertyStatus::kFail: return "FAIL";
    case PropertyStatus::kSkip: return "SKIP";
  }
  return "SKIP";
}

const std::vector<PropertySpec>& declared_properties() { return kDeclared; }

std::vector<PropertyResult> arrival_property_results(const Json& study) {
  Builder b("arrival");
  arrival_properties(b, study);
  return b.report().properties;
}

std::size_t PropertyReport::count(PropertyStatus s) const {
  return static_cast<std::size_t>(std::count_if(properties.begin(), properties.end(),
                                                [&](const PropertyResult& p) { return p.status == s; }));
}

const PropertyResult* PropertyReport::find(std::string_view name) const {
  for (const auto& p : properties)
    if (p.name == name) return &p;
  return nullptr;
}

Json PropertyReport::to_json() const {
  Json j;
  j["experiment"] = experiment;
  j["summary"] = {{"pass", count(S::kPass)}, {"fail", count(S::kFail)}, {"skip", count(S::kSkip)}};
  Json list = Json::array();
  for (const auto& p : properties) {
    Json e;
    e["name"] = p.name;
    e["anchor"] = p.anchor;
    e["status"] = std::string(to_string(p.status));
    e["measured"] = json_value(p.measured);
    e["tolerance"] = json_value(p.tolerance);
    e["index"] = p.index ? Json(*p.index) : Json(nullptr);
    e["detail"] = p.detail;
    list.push_back(e);
  }
  j["properties"] = list;
  return j;
}

PropertyReport evaluate_properties(const fs::path& run_dir) {
  const ExperimentConfig cfg = config_from_json(read_json_file(run_dir / "config.json"));
  Builder b(cfg.name);

  if (cfg.flow) {
    FlowData d;
    d.cfg = cfg;
    d.traj = load_trajectory(run_dir);
    for (const auto& c : d.traj.checkpoints) d.frames.push_back(compute_frame(c.graph));
    std::ifstream in(run_dir / "monitors.csv");
    if (!in) throw Error(ErrorCode::kMissingArtifact, (run_dir / "monitors.csv").string());
    d.records = read_monitors_csv(in);
    d.evolves = d.traj.checkpoints.size() > 1;
    geometry_properties(b, d);
    flow_properties(b, d);
    monitor_properties(b, d, run_dir);
    rescaling_properties(b, d, run_dir);
  } else {
    for (const auto& p : kDeclared) {
      const std::string_view n = p.name;
      if (n.rfind("arrival_", 0) == 0 || n == "determinism" || n == "report_completeness") continue;
      b.skip(p.name, "no flow in this config");
    }
  }

  arrival_properties(b, cfg, run_dir);

  if (cfg.flow && cfg.determinism_check) {
    const Json det = read_json_file(run_dir / "determinism.json");
    std::optional<std::size_t> bad;
    const auto& runs = det.at("runs");
    std::string detail = "threads";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      detail += " " + std::to_string(runs[i].at("threads").get<int>()) +
                (runs[i].at("identical").get<bool>() ? ":same" : ":DIFFERENT");
      if (!runs[i].at("identical").get<bool>() && !bad) bad = i;
    }
    b.pass_if("determinism", !bad, bad ? 1.0 : 0.0, 0.0, bad.value_or(0), detail);
  } else {
    b.skip("determinism", "determinism_check disabled in this config");
  }

  // Completeness: each declared name exactly once, no stray names.
  std::map<std::string, int> seen;
  for (const auto& p : b.report().properties) ++seen[p.name];
  std::string missing;
  for (const auto& p : kDeclared) {
    if (std::string_view(p.name) == "report_completeness") continue;
    if (seen[p.name] != 1) missing += std::string(missing.empty() ? "" : ", ") + p.name;
  }
  const bool complete = missing.empty() && b.report().properties.size() + 1 == kDeclared.size();
  b.pass_if("report_completeness", complete, static_cast<double>(b.report().properties.size() + 1),
            static_cast<double>(kDeclared.size()), 0, complete ? "" : "missing or repeated: " + missing);
  return b.report();
}

}  // namespace starflow
