#include "starflow/arrival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "starflow/error.hpp"
#include "starflow/parallel.hpp"

namespace starflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* field, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::kValidationError, std::string(field) + ": " + msg);
}

double coupling_factor(const ArrivalProblem& p) {
  return p.coupling == HeightCoupling::kGraph ? 1.0 : 0.0;
}

double l2_norm(std::span<const double> v) {
  double m = 0.0;
  for (const double x : v) m += x * x;
  return std::sqrt(m);
}

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (const double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Node gradient with the even ghost at the centre.
double node_grad(std::span<const double> v, std::size_t i, double d) {
  if (i == 0) return 0.0;
  const double vp = i + 1 < v.size() ? v[i + 1] : v[i];
  return (vp - v[i - 1]) / (2.0 * d);
}

double node_second(std::span<const double> v, std::size_t i, double d) {
  const double vm = i == 0 ? v[1] : v[i - 1];
  return (v[i + 1] - 2.0 * v[i] + vm) / (d * d);
}

// Finite-volume geometry of the radial grid in R^{n+1}.
struct Cells {
  std::vector<double> r, a_plus, a_minus, vol;
  double d = 0.0;
};

Cells make_cells(const ArrivalProblem& p) {
  Cells c;
  c.r = p.grid();
  const std::size_t m = c.r.size();
  c.d = c.r[1] - c.r[0];
  c.a_plus.resize(m);
  c.a_minus.resize(m);
  c.vol.resize(m);
  const int n = p.n;
  for (std::size_t i = 0; i < m; ++i) {
    const double rp = c.r[i] + 0.5 * c.d;
    const double rm = i == 0 ? 0.0 : c.r[i] - 0.5 * c.d;
    c.a_plus[i] = std::pow(rp, n);
    c.a_minus[i] = std::pow(rm, n);
    c.vol[i] = (std::pow(rp, n + 1) - std::pow(rm, n + 1)) / (n + 1);
  }
  return c;
}

double flux(double D, double eps) { return D / std::sqrt(eps * eps + D * D); }

double flux_prime(double D, double eps) {
  const double w2 = eps * eps + D * D;
  return eps * eps / (w2 * std::sqrt(w2));
}

std::vector<double> residual(const ArrivalProblem& p, const Cells& c,
                             std::span<const double> v) {
  const std::size_t m = c.r.size();
  const double eps = p.eps, d = c.d, cf = coupling_factor(p);
  std::vector<double> g(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double Dp = (v[i + 1] - v[i]) / d;
    const double Dm = i == 0 ? 0.0 : (v[i] - v[i - 1]) / d;
    const double div = (c.a_plus[i] * flux(Dp, eps) - c.a_minus[i] * flux(Dm, eps)) / c.vol[i];
    const double pg = node_grad(v, i, d);
    const double W = std::sqrt(eps * eps + pg * pg);
    g[i] = -div - (c.r[i] * pg - cf * v[i]) / (2.0 * W) - 1.0 / W;
  }
  return g;
}

// Gaussian elimination with partial pivoting on a tridiagonal system; the
// convective part makes the matrix far from diagonally dominant.
std::vector<double> solve_tridiagonal(const Tridiagonal& J, std::vector<double> b) {
  const std::size_t m = J.diag.size();
  std::vector<double> dl(J.sub.begin() + 1, J.sub.end());
  std::vector<double> d = J.diag;
  std::vector<double> du(J.sup.begin(), J.sup.end() - 1);
  std::vector<double> du2(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      const double f = dl[i] / d[i];
      d[i + 1] -= f * du[i];
      b[i + 1] -= f * b[i];
      dl[i] = 0.0;
    } else {
      const double f = d[i] / dl[i];
      d[i] = dl[i];
      const double tmp = d[i + 1];
      d[i + 1] = du[i] - f * tmp;
      if (i + 2 < m) {
        du2[i] = du[i + 1];
        du[i + 1] = -f * du2[i];
      }
      du[i] = tmp;
      std::swap(b[i], b[i + 1]);
      b[i + 1] -= f * b[i];
    }
  }
  std::vector<double> x(m);
  for (std::size_t i = m; i-- > 0;) {
    double acc = b[i];
    if (i + 1 < m) acc -= du[i] * x[i + 1];
    if (i + 2 < m) acc -= du2[i] * x[i + 2];
    if (d[i] == 0.0) throw Error(ErrorCode::kNewtonDiverged, "singular Jacobian");
    x[i] = acc / d[i];
  }
  return x;
}

Tridiagonal jacobian(const ArrivalProblem& p, const Cells& c, std::span<const double> v) {
  const std::size_t k = c.r.size() - 1;
  const double eps = p.eps, d = c.d, cf = coupling_factor(p);
  Tridiagonal J;
  J.sub.assign(k, 0.0);
  J.diag.assign(k, 0.0);
  J.sup.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double Dp = (v[i + 1] - v[i]) / d;
    const double qp = c.a_plus[i] * flux_prime(Dp, eps) / (d * c.vol[i]);
    J.diag[i] += qp;
    J.sup[i] -= qp;
    if (i == 0) {
      J.diag[i] += cf / (2.0 * eps);
      continue;
    }
    const double Dm = (v[i] - v[i - 1]) / d;
    const double qm = c.a_minus[i] * flux_prime(Dm, eps) / (d * c.vol[i]);
    J.diag[i] += qm;
    J.sub[i] -= qm;
    const double pg = node_grad(v, i, d);
    const double W = std::sqrt(eps * eps + pg * pg);
    const double W3 = W * W * W;
    const double dL =
        -c.r[i] / (2.0 * W) + (c.r[i] * pg - cf * v[i]) * pg / (2.0 * W3) + pg / W3;
    J.sup[i] += dL / (2.0 * d);
    J.sub[i] -= dL / (2.0 * d);
    J.diag[i] += cf / (2.0 * W);
  }
  return J;
}

// Mean curvature of graph(v / eps) and position term at height shift `shift`.
struct GraphGeometry {
  std::vector<double> grad, W, H, support, k_profile, k_rot;
};

GraphGeometry graph_geometry(const ArrivalSolution& s, const ArrivalProblem& p,
                             double shift) {
  const std::size_t m = s.r.size();
  const double d = s.r[1] - s.r[0];
  const double eps = s.eps, cf = coupling_factor(p);
  GraphGeometry g;
  for (auto* x : {&g.grad, &g.W, &g.H, &g.support, &g.k_profile, &g.k_rot})
    x->assign(m - 1, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double pg = node_grad(s.v, i, d);
    const double pp = node_second(s.v, i, d);
    const double W = std::sqrt(eps * eps + pg * pg);
    const double kp = -eps * eps * pp / (W * W * W);
    const double kr = i == 0 ? -pp / W : -pg / (s.r[i] * W);
    g.grad[i] = pg;
    g.W[i] = W;
    g.k_profile[i] = kp;
    g.k_rot[i] = kr;
    g.H[i] = kp + p.n * kr;
    g.support[i] = (-s.r[i] * pg + cf * (s.v[i] + shift)) / W;
  }
  return g;
}

}  // namespace

std::string_view to_string(HeightCoupling c) {
  return c == HeightCoupling::kGraph ? "graph" : "product";
}

HeightCoupling height_coupling_from_string(std::string_view s) {
  if (s == "product") return HeightCoupling::kProduct;
  if (s == "graph") return HeightCoupling::kGraph;
  throw Error(ErrorCode::kParseError, "unknown coupling '" + std::string(s) + "'");
}

void ArrivalProblem::validate() const {
  require(domain == ArrivalDomain::kSphere, "domain", "only the sphere domain is implemented");
  require(n >= 1, "n", "must be >= 1");
  require(R0 > 0.0 && std::isfinite(R0), "R0", "must be positive");
  require(sigma > 0.0 && std::isfinite(sigma), "sigma", "must be positive");
  require(eps > 0.0 && std::isfinite(eps), "eps", "must be positive");
  require(M >= 8, "M", "need at least 8 nodes");
  require(max_iter >= 1, "max_iter", "must be >= 1");
  if (sigma >= extinction_time())
    throw Error(ErrorCode::kBadSigma, "sigma " + std::to_string(sigma) +
                                          " >= extinction time " +
                                          std::to_string(extinction_time()));
}

double ArrivalProblem::extinction_time() const { return R0 * R0 / (2.0 * n); }

double ArrivalProblem::rescaled_radius() const {
  return std::sqrt(R0 * R0 / sigma - 2.0 * n);
}

std::vector<double> ArrivalProblem::grid() const {
  const double R = rescaled_radius();
  std::vector<double> r(M);
  for (std::size_t i = 0; i < M; ++i)
    r[i] = R * static_cast<double>(i) / static_cast<double>(M - 1);
  r.back() = R;
  return r;
}

double exact_arrival(const ArrivalProblem& p, double r) {
  return std::log(p.R0 * p.R0 / (r * r + 2.0 * p.n)) - std::log(p.sigma);
}

double exact_arrival_gradient(const ArrivalProblem& p, double r) {
  return -2.0 * r / (r * r + 2.0 * p.n);
}

std::vector<double> arrival_operator(const ArrivalProblem& p, std::span<const double> v) {
  p.validate();
  if (v.size() != p.M) throw Error(ErrorCode::kInvalidArgument, "v must have M entries");
  return residual(p, make_cells(p), v);
}

Tridiagonal arrival_jacobian(const ArrivalProblem& p, std::span<const double> v) {
  p.validate();
  if (v.size() != p.M) throw Error(ErrorCode::kInvalidArgument, "v must have M entries");
  return jacobian(p, make_cells(p), v);
}

namespace {

// Damped Newton on one eps; returns the final sup residual. `used` counts
// iterations against the shared budget.
double newton(const ArrivalProblem& p, const Cells& c, std::vector<double>& v, double target,
              int& used) {
  auto g = residual(p, c, v);
  double norm = sup_norm(g);
  double merit = l2_norm(g);
  const std::size_t k = g.size();
  while (norm > target) {
    if (used >= p.max_iter)
      throw Error(ErrorCode::kNewtonDiverged,
                  "no convergence in " + std::to_string(p.max_iter) +
                      " iterations, residual " + std::to_string(norm));
    ++used;
    std::vector<double> rhs(k);
    for (std::size_t i = 0; i < k; ++i) rhs[i] = -g[i];
    const auto step = solve_tridiagonal(jacobian(p, c, v), std::move(rhs));

    // Halve until the residual drops. The l2 merit is smoother than the
    // sup-norm near the centre cap.
    double lambda = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, lambda *= 0.5) {
      std::vector<double> trial = v;
      for (std::size_t i = 0; i < k; ++i) trial[i] += lambda * step[i];
      auto gt = residual(p, c, trial);
      const double mt = l2_norm(gt);
      if (std::isfinite(mt) && mt < merit) {
        v = std::move(trial);
        g = std::move(gt);
        merit = mt;
        norm = sup_norm(g);
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw Error(ErrorCode::kNewtonDiverged,
                  "damping failed after " + std::to_string(used) + " iterations, residual " +
                      std::to_string(norm));
  }
  return norm;
}

}  // namespace

ArrivalSolution solve_arrival(const ArrivalProblem& p) {
  p.validate();
  const Cells c = make_cells(p);
  const std::size_t m = c.r.size();
  const double R = c.r.back();

  std::vector<double> v(m);
  const double slope = -exact_arrival_gradient(p, R);
  for (std::size_t i = 0; i < m; ++i) v[i] = slope * (R - c.r[i]);
  v.back() = 0.0;

  // The kink of c dist at the centre is out of Newton's reach for small eps;
  // walk eps down by halving from kContinuationStart.
  std::vector<double> stages;
  for (double e = kContinuationStart; e > p.eps; e *= 0.5) stages.push_back(e);
  stages.push_back(p.eps);

  int used = 0;
  double norm = 0.0;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    ArrivalProblem q = p;
    q.eps = stages[k];
    const bool last = k + 1 == stages.size();
    norm = newton(q, c, v, last ? 1e-8 / p.eps : 1e-6 / q.eps, used);
  }

  ArrivalSolution s;
  s.eps = p.eps;
  s.r = c.r;
  s.v = std::move(v);
  s.residual = norm;
  s.iterations = used;
  fill_diagnostics(s, p);
  return s;
}

void fill_diagnostics(ArrivalSolution& s, const ArrivalProblem& p) {
  const std::size_t m = s.r.size();
  const double R = s.r.back();
  const double d = s.r[1] - s.r[0];
  s.max_grad = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i)
    s.max_grad = std::max(s.max_grad, std::abs(s.v[i + 1] - s.v[i]) / d);
  s.sup_error = 0.0;
  s.c_low = kInf;
  s.c_high = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    s.sup_error = std::max(s.sup_error, std::abs(s.v[i] - exact_arrival(p, s.r[i])));
    if (i + 1 < m) {
      const double q = s.v[i] / (R - s.r[i]);
      s.c_low = std::min(s.c_low, q);
      s.c_high = std::max(s.c_high, q);
    }
  }
  s.translator_defect = translator_residual(s, p);
  s.F_defect = F_identity_check(s, p, std::log(p.sigma));
}

double translator_residual(const ArrivalSolution& s, const ArrivalProblem& p) {
  if (s.r.size() < 3 || s.v.size() != s.r.size())
    throw Error(ErrorCode::kInvalidArgument, "solution grid too small");
  // Normal component of H - X^perp / 2 + e^perp / eps, with e^perp = eps / W.
  const auto g = graph_geometry(s, p, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.H.size(); ++i)
    worst = std::max(worst, std::abs(1.0 / g.W[i] - g.H[i] - 0.5 * g.support[i]));
  return worst * s.eps;
}

double F_closed_form(const ArrivalProblem& p, double grad, double tau) {
  const double W = std::sqrt(p.eps * p.eps + grad * grad);
  if (p.coupling == HeightCoupling::kGraph)
    return 0.5 * (2.0 + std::log(p.sigma) - tau) / W;
  return 1.0 / W;
}

double F_identity_check(const ArrivalSolution& s, const ArrivalProblem& p, double tau) {
  if (s.r.size() < 3 || s.v.size() != s.r.size())
    throw Error(ErrorCode::kInvalidArgument, "solution grid too small");
  ArrivalProblem q = p;
  q.eps = s.eps;
  const auto g = graph_geometry(s, q, std::log(p.sigma) - tau);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < g.H.size(); ++i) {
    const double F = g.H[i] + 0.5 * g.support[i];
    worst = std::max(worst, std::abs(F - F_closed_form(q, g.grad[i], tau)));
    scale = std::max(scale, 1.0 / g.W[i]);
  }
  return worst / scale;
}

double arrival_alpha(const ArrivalSolution& s, const ArrivalProblem& p, double tau,
                     std::size_t images) {
  if (images < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two images");
  const double shift = std::log(p.sigma) - tau;
  const auto g = graph_geometry(s, p, shift);
  const std::size_t m = g.H.size();
  std::vector<double> F(m), rho(m), z(m), nr(m), nz(m);
  for (std::size_t i = 0; i < m; ++i) {
    F[i] = g.H[i] + 0.5 * g.support[i];
    if (!(F[i] > 0.0))
      throw Error(ErrorCode::kFNonpositive, "F~ <= 0 at node " + std::to_string(i));
    rho[i] = s.r[i];
    z[i] = (s.v[i] + shift) / s.eps;
    nr[i] = -g.grad[i] / g.W[i];
    nz[i] = s.eps / g.W[i];
  }
  std::vector<double> cpsi(images);
  for (std::size_t k = 0; k < images; ++k)
    cpsi[k] = std::cos(std::numbers::pi * static_cast<double>(k) /
                       static_cast<double>(images - 1));
  cpsi.back() = -1.0;

  std::vector<double> ratio(m);
  parallel_for(m, [&](std::size_t i) {
    double lo = -std::max(g.k_profile[i], g.k_rot[i]);
    for (std::size_t j = 0; j < m; ++j) {
      const double dz = z[j] - z[i];
      for (const double c : cpsi) {
        if (j == i && c == 1.0) continue;
        const double den = rho[i] * rho[i] + rho[j] * rho[j] - 2.0 * rho[i] * rho[j] * c + dz * dz;
        if (!(den > 0.0)) continue;
        const double num = nr[i] * (rho[j] * c - rho[i]) + nz[i] * dz;
        lo = std::min(lo, 2.0 * num / den);
      }
    }
    ratio[i] = lo / F[i];
  });
  const double worst = *std::min_element(ratio.begin(), ratio.end());
  return worst < 0.0 ? -1.0 / worst : kInf;
}

double rescaled_sphere_alpha(const ArrivalProblem& p, double tau) {
  const double rho2 = p.R0 * p.R0 * std::exp(-tau) - 2.0 * p.n;
  if (!(rho2 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau beyond extinction");
  return p.n + 0.5 * rho2;
}

StudyReport convergence_study(const ArrivalProblem& base, std::span<const double> ladder) {
  if (ladder.empty()) throw Error(ErrorCode::kInvalidArgument, "empty eps ladder");
  StudyReport rep;
  const double tau = 1.0 + std::log(base.sigma);
  for (const double eps : ladder) {
    ArrivalProblem p = base;
    p.eps = eps;
    const ArrivalSolution s = solve_arrival(p);
    StudyRow row;
    row.eps = eps;
    row.sup_error = s.sup_error;
    row.max_grad = s.max_grad;
    row.c_low = s.c_low;
    row.c_high = s.c_high;
    row.translator_defect = s.translator_defect;
    row.F_defect = s.F_defect;
    row.v0 = s.v.front();
    row.residual = s.residual;
    row.iterations = s.iterations;
    row.alpha = arrival_alpha(s, p, tau);
    row.v_boundary = s.v.back();
    row.min_interior = *std::min_element(s.v.begin(), s.v.end() - 1);
    row.max_increment = -kInf;
    for (std::size_t i = 0; i + 1 < s.v.size(); ++i)
      row.max_increment = std::max(row.max_increment, s.v[i + 1] - s.v[i]);
    rep.rows.push_back(row);
  }
  rep.errors_decreasing = true;
  rep.alpha_nondecreasing = true;
  double gmin = kInf, gmax = 0.0;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    gmin = std::min(gmin, rep.rows[k].max_grad);
    gmax = std::max(gmax, rep.rows[k].max_grad);
    if (k > 0) {
      if (!(rep.rows[k].sup_error < rep.rows[k - 1].sup_error)) rep.errors_decreasing = false;
      if (rep.rows[k].alpha < 0.95 * rep.rows[k - 1].alpha) rep.alpha_nondecreasing = false;
    }
  }
  rep.grad_ratio = gmax / gmin;
  // tau = 1 + log sigma can lie past extinction, so the reference is the
  // infimum of n + rho^2 / 2 over the remaining rescaled slices.
  rep.alpha_smooth = base.n;
  rep.alpha_limit_ok = rep.rows.back().alpha >= rep.alpha_smooth;
  return rep;
}

}  // namespace starflow
