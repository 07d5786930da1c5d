#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "starflow/geometry.hpp"

namespace starflow {

struct FlowConfig {
  ShapeSpec shape = SphereShape{};
  int n = 2;
  std::size_t N = 256;
  double cfl_geom = 0.2;
  double cfl_curv = 0.2;
  /// Curvature ceiling; <= 0 selects 1000 / max r0.
  double stop_Amax = 0.0;
  /// Radial floor; <= 0 selects 3 h min r0.
  double stop_rmin = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
  std::size_t monitor_every = 100;
  double a1 = 1.0;
  double a2 = 0.0;

  /// Throws Error(kValidationError) naming the offending field.
  void validate() const;
};

enum class FlowEvent {
  kDegenerate,
  kCurvatureCeiling,
  kRadialFloor,
  kTimeCeiling,
  kBlowup,
};

std::string_view to_string(FlowEvent e);
FlowEvent flow_event_from_string(std::string_view s);

struct Checkpoint {
  double t = 0.0;
  double max_H = 0.0;
  RadialGraph graph;
};

struct Trajectory {
  std::vector<Checkpoint> checkpoints;
  /// Graphs at the monitor cadence (every monitor_every steps, plus the
  /// first and last state).
  std::vector<RadialGraph> samples;
  FlowEvent terminal_event = FlowEvent::kTimeCeiling;
  std::string terminal_detail;
  std::size_t steps = 0;
  /// First checkpoint at or after ten steps; the start of the rescaled window.
  double sigma = 0.0;
  double stop_Amax = 0.0;
  double stop_rmin = 0.0;
  double initial_diameter = 0.0;
  double initial_max_H = 0.0;
  std::optional<double> t0;
  std::optional<double> t0_residual;
};

/// Stable step: min(cfl_geom (h min r)^2, cfl_curv / max|A|^2).
double select_dt(const RadialGraph& g, double cfl_geom = 0.2, double cfl_curv = 0.2);

/// Radial velocity -H sqrt(1 + r_phi^2 / r^2) at every node.
std::vector<double> radial_velocity(const RadialGraph& g);

/// One classical RK4 step of the radial-graph mean curvature flow.
RadialGraph step(const RadialGraph& g, double dt);

Trajectory run(const FlowConfig& cfg);

/// Steps g forward with select_dt until exactly time t (t >= g.t).
RadialGraph advance_to(const RadialGraph& g, double t, double cfl_geom = 0.2,
                       double cfl_curv = 0.2);

struct SingularTimeFit {
  double t0 = 0.0;
  double scale = 0.0;  // c in H = c / sqrt(t0 - t)
  double residual = 0.0;
  std::size_t points = 0;
};

/// Fits max H(t) = c / sqrt(t0 - t) to the last (up to 8) checkpoints.
SingularTimeFit fit_singular_time(std::span<const double> t,
                                  std::span<const double> max_H);
SingularTimeFit estimate_singular_time(const Trajectory& traj);

}  // namespace starflow
