#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "starflow/arrival.hpp"
#include "starflow/flow.hpp"
#include "starflow/io.hpp"
#include "starflow/monitors.hpp"
#include "starflow/rescaling.hpp"

namespace starflow {

struct RescalingOptions {
  /// Time of the weighted-area slice; <= 0 selects max(sigma, t_final / 2).
  double slice_time = 0.0;
  /// Encloser radii as multiples of max |X~| on the slice.
  std::vector<double> encloser_factors{1.0, 1.2};
  /// Absolute encloser radii.
  std::vector<double> encloser_radii{3.0};
};

struct ArrivalOptions {
  bool enabled = false;
  ArrivalProblem problem;
  std::vector<double> eps_ladder{std::begin(kDefaultEpsLadder), std::end(kDefaultEpsLadder)};
  /// eps of the M -> 2M refinement study.
  double refine_eps = 0.05;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::optional<FlowConfig> flow;
  /// Monitor thresholds h*; empty selects default_ladder.
  std::optional<Ladder> ladder;
  std::size_t images = kDefaultImages;
  RescalingOptions rescaling;
  ArrivalOptions arrival;
  std::optional<TangentFlow> expect_tangent_flow;
  /// Rerun the flow at 1, 2 and max threads and compare monitors.csv bytes.
  bool determinism_check = false;
  std::uint64_t seed = 1;
  std::string output_dir;
  /// Human-readable notes on defaults filled in while parsing.
  std::vector<std::string> defaults_applied;

  void validate() const;
};

/// Throws PARSE_ERROR for malformed JSON and VALIDATION_ERROR naming the
/// field path for bad or unknown fields.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const Json& j);
/// Resolved configuration including defaults; parses back to the same config.
Json config_to_json(const ExperimentConfig& cfg);

/// Monitor records of a trajectory: one per sample and checkpoint, by time.
std::vector<StarMonitorRecord> monitor_trajectory(const Trajectory& traj,
                                                  const ExperimentConfig& cfg);
std::string monitors_csv_text(const std::vector<StarMonitorRecord>& records);

enum class PropertyStatus { kPass, kFail, kSkip };
std::string_view to_string(PropertyStatus s);

struct PropertyResult {
  std::string name;
  std::string anchor;
  PropertyStatus status = PropertyStatus::kSkip;
  double measured = 0.0;
  double tolerance = 0.0;
  /// Offending record, checkpoint, row or rung; always set on FAIL.
  std::optional<std::size_t> index;
  std::string detail;
};

struct PropertyReport {
  std::string experiment;
  std::vector<PropertyResult> properties;

  std::size_t count(PropertyStatus s) const;
  bool any_fail() const { return count(PropertyStatus::kFail) > 0; }
  const PropertyResult* find(std::string_view name) const;
  Json to_json() const;
};

struct PropertySpec {
  const char* name;
  const char* anchor;
};
/// Every property the report evaluates, in report order.
const std::vector<PropertySpec>& declared_properties();

/// Writes every artifact and report.json into `out`. Returns the report.
PropertyReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// The elliptic-regularization properties of an arrival_study_json document.
std::vector<PropertyResult> arrival_property_results(const Json& study);

/// Reads the artifacts of a run directory and evaluates every property.
/// Throws MISSING_ARTIFACT when a required file is absent.
PropertyReport evaluate_properties(const std::filesystem::path& run_dir);

/// Checkpoints stored in a run directory, in order.
Trajectory load_trajectory(const std::filesystem::path& run_dir);
/// Classifies the blowup of a stored run with its fitted t0. Throws
/// FIT_FAILED when the run has no t0 and NO_BLOWUP without curvature growth.
TangentFlowReport blowup_from_run(const std::filesystem::path& run_dir);
Json tangent_flow_json(const TangentFlowReport& rep);

struct ArrivalRefinement {
  double eps = 0.0;
  std::size_t M = 0;
  ArrivalSolution coarse, fine;  // M and 2M
  double translator_order = 0.0;
  double F_order = 0.0;
};
ArrivalRefinement arrival_refinement(const ArrivalProblem& base, double eps);

Json arrival_solution_json(const ArrivalProblem& p, const ArrivalSolution& s);
Json arrival_study_json(const ArrivalProblem& p, const StudyReport& study,
                        const ArrivalRefinement& refine);
std::string arrival_study_csv(const StudyReport& study);

}  // namespace starflow
