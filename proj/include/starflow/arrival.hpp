#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace starflow {

enum class ArrivalDomain { kSphere, kAxisym };

/// How the vertical coordinate of the graph enters the position term.
/// kProduct: only the horizontal slice is rescaled, so the vertical
/// coordinate drops out and the graph is an exact translator whose
/// eps -> 0 limit is the arrival time. kGraph: the vertical coordinate is
/// set to v / eps on the graph; the eps -> 0 limit is then a different
/// function (v(0) -> 0.735 instead of log 2.5 for the default problem).
enum class HeightCoupling { kProduct, kGraph };

std::string_view to_string(HeightCoupling c);
HeightCoupling height_coupling_from_string(std::string_view s);

struct ArrivalProblem {
  ArrivalDomain domain = ArrivalDomain::kSphere;
  double R0 = 1.0;
  int n = 2;
  double sigma = 0.1;
  std::size_t M = 1024;
  double eps = 0.05;
  HeightCoupling coupling = HeightCoupling::kProduct;
  int max_iter = 200;

  /// Throws BAD_SIGMA when sigma >= R0^2 / 2n, VALIDATION_ERROR otherwise.
  void validate() const;
  double extinction_time() const;
  /// sqrt(R0^2 / sigma - 2n).
  double rescaled_radius() const;
  std::vector<double> grid() const;
};

/// log(R0^2 / (|x|^2 + 2n)) - log sigma.
double exact_arrival(const ArrivalProblem& p, double r);
double exact_arrival_gradient(const ArrivalProblem& p, double r);

struct ArrivalSolution {
  double eps = 0.0;
  std::vector<double> r;
  std::vector<double> v;
  double residual = 0.0;
  int iterations = 0;
  double max_grad = 0.0;
  double c_low = 0.0, c_high = 0.0;
  double sup_error = 0.0;
  double translator_defect = 0.0;
  double F_defect = 0.0;
};

/// Discrete operator of the radially reduced regularized equation at the
/// free nodes 0..M-2 (the last node is the Dirichlet boundary).
std::vector<double> arrival_operator(const ArrivalProblem& p, std::span<const double> v);

/// Tridiagonal matrix; sub[0] and sup.back() are unused.
struct Tridiagonal {
  std::vector<double> sub, diag, sup;
};

/// Analytic Jacobian of arrival_operator with respect to v[0..M-2].
Tridiagonal arrival_jacobian(const ArrivalProblem& p, std::span<const double> v);

inline constexpr double kContinuationStart = 0.5;

/// Damped Newton from v0 = c dist, continued in eps by halving from
/// kContinuationStart when eps is smaller. Throws NEWTON_DIVERGED with the
/// last residual when the target 1e-8 / eps is not reached within max_iter
/// iterations in total.
ArrivalSolution solve_arrival(const ArrivalProblem& p);

/// Fills the diagnostic fields of `s` from its r and v.
void fill_diagnostics(ArrivalSolution& s, const ArrivalProblem& p);

/// Sup-norm of the translator defect of graph(v / eps), measured with a
/// non-divergence discretisation of the mean curvature, times eps.
double translator_residual(const ArrivalSolution& s, const ArrivalProblem& p);

/// F~ computed on the graph translated to time tau, compared with its
/// closed form; relative to the closed form's magnitude at tau = log sigma.
double F_identity_check(const ArrivalSolution& s, const ArrivalProblem& p, double tau);

/// Closed form of F~ at node i given the node gradient p_i.
double F_closed_form(const ArrivalProblem& p, double grad, double tau);

/// alpha_eps = -1 / min(Z~_* / F~) over the translated graph at tau, with Z~
/// extremes over all node pairs and `images` rotations.
double arrival_alpha(const ArrivalSolution& s, const ArrivalProblem& p, double tau,
                     std::size_t images = 64);

/// Interior noncollapsing constant of the smooth rescaled sphere slice at tau.
double rescaled_sphere_alpha(const ArrivalProblem& p, double tau);

struct StudyRow {
  double eps = 0.0;
  double sup_error = 0.0;
  double max_grad = 0.0;
  double c_low = 0.0, c_high = 0.0;
  double translator_defect = 0.0;
  double F_defect = 0.0;
  double v0 = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double alpha = 0.0;
  double v_boundary = 0.0;
  double min_interior = 0.0;   // min of v over nodes 0..M-2
  double max_increment = 0.0;  // max of v[i+1] - v[i]; negative when decreasing
};

struct StudyReport {
  std::vector<StudyRow> rows;
  bool errors_decreasing = false;
  double grad_ratio = 0.0;  // max / min of max|Dv| over the ladder
  bool alpha_nondecreasing = false;
  double alpha_smooth = 0.0;  // noncollapsing constant of the rescaled sphere flow
  bool alpha_limit_ok = false;  // last alpha_eps >= alpha_smooth
};

inline constexpr double kDefaultEpsLadder[] = {0.2, 0.1, 0.05, 0.025};

StudyReport convergence_study(const ArrivalProblem& base, std::span<const double> ladder);

}  // namespace starflow
