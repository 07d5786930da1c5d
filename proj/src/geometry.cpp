#include "starflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "geometry_kernels.hpp"
#include "starflow/error.hpp"
#include "starflow/numfmt.hpp"
#include "starflow/parallel.hpp"

namespace starflow {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Profile rho(z) on |z| <= 2.5 bulb_radius: a neck of radius neck_radius
// opening with `slope` and bending over to rho ~ z^(1 - taper / 2) past
// 0.1 bulb_radius, closed by 1 - (z / Z)^(2 sharpness). rho / z decreases
// along the profile, which is exactly star-shapedness about the origin.
double dumbbell_profile(const DumbbellShape& d, double z) {
  const double Z = 2.5 * d.bulb_radius;
  const double z1 = 0.1 * d.bulb_radius;
  const double q = 1.0 + (z / z1) * (z / z1);
  const double open = d.slope * d.slope * z * z * std::pow(q, -0.5 * d.taper);
  const double cap = 1.0 - std::pow(std::abs(z) / Z, 2.0 * d.sharpness);
  return std::sqrt(std::max(0.0, (d.neck_radius * d.neck_radius + open) * cap));
}

// Radius along the ray at polar angle phi: bisection on the profile height,
// along which the polar angle decreases monotonically.
double dumbbell_radius(const DumbbellShape& d, double phi) {
  const double target = std::min(phi, std::numbers::pi - phi);
  double lo = 0.0, hi = 2.5 * d.bulb_radius;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * d.bulb_radius; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::atan2(dumbbell_profile(d, mid), mid) > target) lo = mid; else hi = mid;
  }
  const double z = 0.5 * (lo + hi);
  return std::hypot(dumbbell_profile(d, z), z);
}

}  // namespace

std::string_view to_string(Mode mode) {
  return mode == Mode::kCurve2D ? "CURVE_2D" : "AXISYM";
}

Mode mode_from_string(std::string_view s) {
  if (s == "CURVE_2D") return Mode::kCurve2D;
  if (s == "AXISYM") return Mode::kAxisym;
  throw Error(ErrorCode::kParseError, "unknown mode '" + std::string(s) + "'");
}

std::size_t RadialGraph::intervals() const {
  return mode == Mode::kCurve2D ? r.size() : r.size() - 1;
}

double RadialGraph::spacing() const {
  const double extent = mode == Mode::kCurve2D ? 2.0 * kPi : kPi;
  return extent / static_cast<double>(intervals());
}

double RadialGraph::angle(std::size_t i) const {
  if (mode == Mode::kAxisym && i + 1 == r.size()) return kPi;
  return static_cast<double>(i) * spacing();
}

std::string shape_name(const ShapeSpec& spec) {
  return std::visit(Overloaded{
                        [](const SphereShape&) { return "sphere"; },
                        [](const PerturbedSphereShape&) { return "perturbed_sphere"; },
                        [](const EllipseShape&) { return "ellipse"; },
                        [](const DumbbellShape&) { return "dumbbell"; },
                    },
                    spec);
}

RadialGraph build_shape(const ShapeSpec& spec, int n, std::size_t N) {
  if (N < 16) throw Error(ErrorCode::kBadGrid, "N must be at least 16");
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be at least 1");
  const bool dumbbell = std::holds_alternative<DumbbellShape>(spec);
  if (std::holds_alternative<EllipseShape>(spec) && n != 1)
    throw Error(ErrorCode::kInvalidArgument, "ellipse fixtures are curves (n = 1)");

  RadialGraph g;
  g.n = n;
  g.mode = (n == 1 && !dumbbell) ? Mode::kCurve2D : Mode::kAxisym;
  g.r.resize(g.mode == Mode::kCurve2D ? N : N + 1);
  for (std::size_t i = 0; i < g.r.size(); ++i) {
    const double a = g.angle(i);
    g.r[i] = std::visit(
        Overloaded{
            [](const SphereShape& s) { return s.radius; },
            [a](const PerturbedSphereShape& s) {
              return s.radius * (1.0 + s.amplitude * std::cos(s.frequency * a));
            },
            [a](const EllipseShape& e) {
              const double bc = e.b * std::cos(a);
              const double as = e.a * std::sin(a);
              return e.a * e.b / std::sqrt(bc * bc + as * as);
            },
            [a](const DumbbellShape& d) { return dumbbell_radius(d, a); },
        },
        spec);
    if (!(g.r[i] > 0.0) || !std::isfinite(g.r[i]))
      throw Error(ErrorCode::kNonStarShaped, "radial function is not positive");
  }
  if (star_gauge(compute_frame(g)) <= 0.0)
    throw Error(ErrorCode::kNonStarShaped, "<X, nu> is not positive");
  return g;
}

std::vector<double> SurfaceFrame::principal_curvatures(std::size_t i) const {
  if (mode == Mode::kCurve2D || n == 1) return {kappa_profile[i]};
  std::vector<double> out(static_cast<std::size_t>(n), kappa_rot[i]);
  out[0] = kappa_profile[i];
  std::sort(out.begin(), out.end());
  return out;
}

double SurfaceFrame::total_area() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < dmu.size(); ++i) sum += weight[i] * dmu[i];
  return sum * h;
}

double SurfaceFrame::max_abs_A() const {
  double m = 0.0;
  for (double a2 : A2) m = std::max(m, a2);
  return std::sqrt(m);
}

double unit_sphere_area(int n) {
  const double k = 0.5 * (n + 1);
  return 2.0 * std::pow(kPi, k) / std::tgamma(k);
}

SurfaceFrame compute_frame(const RadialGraph& g) {
  const std::size_t m = g.size();
  if (m < 3) throw Error(ErrorCode::kBadGrid, "too few nodes");
  SurfaceFrame f;
  f.n = g.n;
  f.mode = g.mode;
  f.h = g.spacing();
  f.t = g.t;
  for (auto* v : {&f.x, &f.y, &f.nu_x, &f.nu_y, &f.kappa_profile, &f.kappa_rot,
                  &f.lambda_min, &f.lambda_max, &f.H, &f.A2, &f.support, &f.dmu,
                  &f.weight, &f.grad_A, &f.r_phi, &f.r_phiphi, &f.speed_factor})
    v->assign(m, 0.0);
  f.r = g.r;

  const bool axisym = g.mode == Mode::kAxisym;
  const double omega = axisym ? unit_sphere_area(g.n - 1) : 1.0;

  const auto cot = detail::cotangents(g);
  parallel_for(m, [&](std::size_t i) {
    double rm = 0.0, rp = 0.0;
    detail::neighbours(g.mode, g.r, i, rm, rp);
    const bool pole = detail::is_pole(g.mode, i, m);
    const double phi = g.angle(i);
    const double r0 = g.r[i];
    const auto ng = detail::node_geometry(g.mode, g.n, rm, r0, rp, f.h, cot[i], pole);

    double er_x, er_y, ep_x, ep_y;
    if (axisym) {
      const double sp = pole ? 0.0 : std::sin(phi);
      const double cp = i == 0 ? 1.0 : (pole ? -1.0 : std::cos(phi));
      er_x = sp, er_y = cp, ep_x = cp, ep_y = -sp;
    } else {
      const double cp = std::cos(phi), sp = std::sin(phi);
      er_x = cp, er_y = sp, ep_x = -sp, ep_y = cp;
    }
    f.x[i] = r0 * er_x;
    f.y[i] = r0 * er_y;
    f.nu_x[i] = (r0 * er_x - ng.r_phi * ep_x) / ng.s;
    f.nu_y[i] = (r0 * er_y - ng.r_phi * ep_y) / ng.s;
    f.kappa_profile[i] = ng.kappa_profile;
    f.kappa_rot[i] = (axisym && g.n >= 2) ? ng.kappa_rot : 0.0;
    if (axisym && g.n >= 2) {
      f.lambda_min[i] = std::min(ng.kappa_profile, ng.kappa_rot);
      f.lambda_max[i] = std::max(ng.kappa_profile, ng.kappa_rot);
    } else {
      f.lambda_min[i] = f.lambda_max[i] = ng.kappa_profile;
    }
    f.H[i] = ng.H;
    f.A2[i] = ng.A2;
    f.support[i] = r0 * r0 / ng.s;
    f.dmu[i] = axisym ? omega * std::pow(std::abs(f.x[i]), g.n - 1) * ng.s : ng.s;
    f.weight[i] = pole ? 0.5 : 1.0;
    f.r_phi[i] = ng.r_phi;
    f.r_phiphi[i] = ng.r_phiphi;
    f.speed_factor[i] = ng.s / r0;
  });

  // Arc-length derivatives of the principal curvatures.
  parallel_for(m, [&](std::size_t i) {
    double kpm, kpp, krm, krp;
    detail::neighbours(g.mode, f.kappa_profile, i, kpm, kpp);
    detail::neighbours(g.mode, f.kappa_rot, i, krm, krp);
    const double ds = 2.0 * f.h * f.speed_factor[i] * g.r[i];
    const double dkp = (kpp - kpm) / ds;
    const double dkr = (krp - krm) / ds;
    const double extra = (axisym && g.n >= 2) ? 3.0 * (g.n - 1) * dkr * dkr : 0.0;
    f.grad_A[i] = std::sqrt(dkp * dkp + extra);
  });

  double d2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double dx = axisym ? f.x[i] + f.x[j] : f.x[i] - f.x[j];
      const double dy = f.y[i] - f.y[j];
      d2 = std::max(d2, dx * dx + dy * dy);
    }
    if (axisym) d2 = std::max(d2, 4.0 * f.x[i] * f.x[i]);
  }
  f.diameter = std::sqrt(d2);
  f.beta = std::max(f.max_abs_A(), f.diameter);
  return f;
}

double star_gauge(const SurfaceFrame& f) {
  return *std::min_element(f.support.begin(), f.support.end());
}

double parametric_area(const RadialGraph& like, std::span<const double> x,
                       std::span<const double> y) {
  const std::size_t m = like.size();
  if (x.size() != m || y.size() != m)
    throw Error(ErrorCode::kInvalidArgument, "profile size mismatch");
  const double h = like.spacing();
  const bool axisym = like.mode == Mode::kAxisym;
  const double omega = axisym ? unit_sphere_area(like.n - 1) : 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double xm, xp, ym, yp;
    if (!axisym) {
      xm = x[(i + m - 1) % m], xp = x[(i + 1) % m];
      ym = y[(i + m - 1) % m], yp = y[(i + 1) % m];
    } else {
      // rho is odd and z even through each pole.
      xm = i == 0 ? -x[1] : x[i - 1];
      xp = i + 1 == m ? -x[m - 2] : x[i + 1];
      ym = i == 0 ? y[1] : y[i - 1];
      yp = i + 1 == m ? y[m - 2] : y[i + 1];
    }
    const double dx = (xp - xm) / (2.0 * h);
    const double dy = (yp - ym) / (2.0 * h);
    const double s = std::sqrt(dx * dx + dy * dy);
    const double w = (axisym && (i == 0 || i + 1 == m)) ? 0.5 : 1.0;
    sum += w * (axisym ? omega * std::pow(std::abs(x[i]), like.n - 1) * s : s);
  }
  return sum * h;
}

void write_graph_csv(std::ostream& os, const RadialGraph& g) {
  os << "# n=" << g.n << " mode=" << to_string(g.mode)
     << " t=" << format_double(g.t) << "\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    os << format_double(g.angle(i)) << "," << format_double(g.r[i]) << "\n";
}

RadialGraph read_graph_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("#", 0) != 0)
    throw Error(ErrorCode::kParseError, "missing '# n=... mode=... t=...' header");
  RadialGraph g;
  bool have_n = false, have_mode = false, have_t = false;
  std::istringstream hs(line.substr(1));
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "n") {
      g.n = static_cast<int>(parse_double(val));
      have_n = true;
    } else if (key == "mode") {
      g.mode = mode_from_string(val);
      have_mode = true;
    } else if (key == "t") {
      g.t = parse_double(val);
      have_t = true;
    }
  }
  if (!have_n || !have_mode || !have_t)
    throw Error(ErrorCode::kParseError, "incomplete graph header");
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorCode::kParseError, "expected 'angle,r' row");
    g.r.push_back(parse_double(std::string_view(line).substr(comma + 1)));
  }
  const std::size_t min_rows = g.mode == Mode::kCurve2D ? 16 : 17;
  if (g.r.size() < min_rows) throw Error(ErrorCode::kBadGrid, "too few rows");
  return g;
}

}  // namespace starflow
