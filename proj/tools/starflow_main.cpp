#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "starflow/error.hpp"
#include "starflow/experiment.hpp"
#include "starflow/numfmt.hpp"
#include "starflow/parallel.hpp"

namespace fs = std::filesystem;
using namespace starflow;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitError = 2;

void print_result(const PropertyResult& p) {
  std::cout << to_string(p.status) << "  " << p.name << "  measured=" << format_double(p.measured)
            << " tol=" << format_double(p.tolerance);
  if (p.index) std::cout << " index=" << *p.index;
  if (!p.detail.empty()) std::cout << "  (" << p.detail << ")";
  std::cout << "\n";
}

int print_report(const PropertyReport& rep) {
  for (const auto& p : rep.properties) print_result(p);
  std::cout << rep.experiment << ": " << rep.count(PropertyStatus::kPass) << " PASS, "
            << rep.count(PropertyStatus::kFail) << " FAIL, " << rep.count(PropertyStatus::kSkip)
            << " SKIP\n";
  return rep.any_fail() ? kExitFail : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Star-shaped mean curvature flow laboratory"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all available)")->check(CLI::NonNegativeNumber);

  auto* run_cmd = app.add_subcommand("run", "Run an experiment and write its artifacts and report");
  std::string config_path, out_dir;
  run_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_dir, "Output directory (default: output_dir from the config)");

  auto* blowup_cmd = app.add_subcommand("blowup", "Classify the tangent flow of a stored run");
  std::string run_dir, blowup_out;
  blowup_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  blowup_cmd->add_option("--out", blowup_out, "Report file")->required();

  auto* arrival_cmd = app.add_subcommand("arrival", "Solve the regularized arrival-time problem");
  ArrivalProblem problem;
  std::string arrival_out = "arrival.json", coupling = "product";
  bool study = false;
  std::vector<double> ladder(std::begin(kDefaultEpsLadder), std::end(kDefaultEpsLadder));
  double refine_eps = 0.05;
  arrival_cmd->add_option("--R0", problem.R0, "Initial sphere radius");
  arrival_cmd->add_option("--n", problem.n, "Hypersurface dimension");
  arrival_cmd->add_option("--sigma", problem.sigma, "Start time of the rescaled window");
  arrival_cmd->add_option("--eps", problem.eps, "Regularization parameter");
  arrival_cmd->add_option("--M", problem.M, "Radial grid nodes");
  arrival_cmd->add_option("--coupling", coupling, "Height coupling")->check(CLI::IsMember({"product", "graph"}));
  arrival_cmd->add_option("--out", arrival_out, "Output JSON");
  arrival_cmd->add_flag("--study", study, "Run the eps ladder and write arrival_study.csv");
  arrival_cmd->add_option("--ladder", ladder, "eps ladder for --study");
  arrival_cmd->add_option("--refine-eps", refine_eps, "eps of the M -> 2M refinement in --study");

  auto* report_cmd = app.add_subcommand("report", "Re-evaluate the properties of a stored run");
  std::string report_run, report_out;
  report_cmd->add_option("--run", report_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report_out, "Report file (default: <run>/report.json)");

  CLI11_PARSE(app, argc, argv);
  set_num_threads(threads);

  try {
    if (*run_cmd) {
      const auto cfg = parse_config(config_path);
      const fs::path out = !out_dir.empty() ? fs::path(out_dir)
                           : !cfg.output_dir.empty() ? fs::path(cfg.output_dir)
                                                     : fs::path("runs") / cfg.name;
      for (const auto& note : cfg.defaults_applied) std::cout << "default  " << note << "\n";
      const auto rep = run_experiment(cfg, out);
      std::cout << "artifacts in " << out.string() << "\n";
      return print_report(rep);
    }
    if (*blowup_cmd) {
      const auto rep = blowup_from_run(run_dir);
      Json j = tangent_flow_json(rep);
      j["status"] = "OK";
      write_json_file(blowup_out, j);
      std::cout << "classification " << to_string(rep.classification) << ", best residual "
                << format_double(rep.best_residual) << ", H^2 (t0 - t) = "
                << format_double(rep.h2_gap.back()) << "\n";
      return rep.classification == TangentFlow::kUnresolved ? kExitFail : 0;
    }
    if (*arrival_cmd) {
      problem.coupling = height_coupling_from_string(coupling);
      problem.validate();
      if (!study) {
        const auto s = solve_arrival(problem);
        write_json_file(arrival_out, arrival_solution_json(problem, s));
        std::cout << "eps " << format_double(s.eps) << ": v(0) = " << format_double(s.v.front())
                  << " (exact limit " << format_double(exact_arrival(problem, 0.0)) << "), sup error "
                  << format_double(s.sup_error) << ", residual " << format_double(s.residual) << " after "
                  << s.iterations << " iterations\n";
        return 0;
      }
      const auto rep = convergence_study(problem, ladder);
      const auto refine = arrival_refinement(problem, refine_eps);
      const Json j = arrival_study_json(problem, rep, refine);
      write_json_file(arrival_out, j);
      const fs::path csv = fs::path(arrival_out).parent_path() / "arrival_study.csv";
      write_text_file(csv, arrival_study_csv(rep));
      std::cout << "study table in " << csv.string() << "\n";
      bool fail = false;
      for (const auto& p : arrival_property_results(j)) {
        print_result(p);
        fail = fail || p.status == PropertyStatus::kFail;
      }
      return fail ? kExitFail : 0;
    }
    if (*report_cmd) {
      const auto rep = evaluate_properties(report_run);
      write_json_file(report_out.empty() ? fs::path(report_run) / "report.json" : fs::path(report_out),
                      rep.to_json());
      return print_report(rep);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
