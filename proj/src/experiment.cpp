#include "starflow/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "starflow/error.hpp"
#include "starflow/numfmt.hpp"
#include "starflow/parallel.hpp"

namespace starflow {

namespace fs = std::filesystem;

namespace {

// Samples and checkpoints merged by time, duplicates dropped.
std::vector<const RadialGraph*> record_graphs(const Trajectory& traj) {
  std::vector<const RadialGraph*> out;
  for (const auto& g : traj.samples) out.push_back(&g);
  for (const auto& c : traj.checkpoints) out.push_back(&c.graph);
  std::stable_sort(out.begin(), out.end(),
                   [](const RadialGraph* a, const RadialGraph* b) { return a->t < b->t; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const RadialGraph* a, const RadialGraph* b) { return a->t == b->t; }),
            out.end());
  return out;
}

std::string rescaled_csv_text(const Trajectory& traj) {
  std::ostringstream os;
  os << "t,tau,maxAbsX,maxSpeed,minFtilde,identityError\n";
  for (const RadialGraph* g : record_graphs(traj)) {
    if (!(g->t > 0.0) || g->t < traj.sigma) continue;
    const auto f = compute_frame(*g);
    const auto rf = continuous_rescale(f, g->t);
    const auto F = compute_F(f, g->t, 1.0, 0.0);
    double fmax = 0.0, err = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) {
      fmax = std::max(fmax, std::abs(F[i]));
      err = std::max(err, std::abs(F[i] - 2.0 * std::sqrt(g->t) * rf.F[i]));
    }
    os << format_double(g->t) << "," << format_double(rf.tau) << ","
       << format_double(rf.max_abs_X) << ","
       << format_double(*std::max_element(rf.speed.begin(), rf.speed.end())) << ","
       << format_double(*std::min_element(rf.F.begin(), rf.F.end())) << ","
       << format_double(err / fmax) << "\n";
  }
  return os.str();
}

Json events_json(const Trajectory& traj, std::size_t records) {
  Json j;
  j["event"] = std::string(to_string(traj.terminal_event));
  j["detail"] = traj.terminal_detail;
  j["steps"] = traj.steps;
  j["t_final"] = traj.checkpoints.back().t;
  j["t0"] = traj.t0 ? Json(*traj.t0) : Json(nullptr);
  j["t0_residual"] = traj.t0_residual ? Json(*traj.t0_residual) : Json(nullptr);
  j["sigma"] = traj.sigma;
  j["stop_Amax"] = traj.stop_Amax;
  j["stop_rmin"] = traj.stop_rmin;
  j["initial_diameter"] = traj.initial_diameter;
  j["initial_max_H"] = traj.initial_max_H;
  j["checkpoints"] = traj.checkpoints.size();
  std::vector<double> hs;
  for (const auto& c : traj.checkpoints) hs.push_back(c.max_H);
  j["checkpoint_max_H"] = hs;
  j["records"] = records;
  return j;
}

Json error_status(const Error& e) {
  return {{"status", std::string(to_string(e.code()))}, {"detail", e.what()}};
}

// F-evolution residual of the configured shape at N / 2 and N, both started
// from t = 0 and centred one step after the first record at or after sigma.
// Each level uses half its own stable step as the window spacing, so the
// order measures the combined space-time error under h-refinement.
Json fevolution_json(const Trajectory& traj, const FlowConfig& fc) {
  const auto graphs = record_graphs(traj);
  const auto it = std::find_if(graphs.begin(), graphs.end(), [&](const RadialGraph* g) {
    return g->t > 0.0 && g->t >= traj.sigma;
  });
  if (it == graphs.end()) return {{"status", "SKIPPED"}, {"detail", "no record at or after sigma"}};
  try {
    const double t = (*it)->t;
    const std::size_t Ns[] = {fc.N / 2, fc.N};
    FEvolutionResidual r[2];
    for (int k = 0; k < 2; ++k) {
      const auto g = advance_to(build_shape(fc.shape, fc.n, Ns[k]), t, fc.cfl_geom, fc.cfl_curv);
      r[k] = F_evolution_residual(make_F_window(g, 0.5 * select_dt(g, fc.cfl_geom, fc.cfl_curv)),
                                  fc.a1, fc.a2);
    }
    return {{"status", "OK"},
            {"t", t},
            {"delta", {r[0].delta, r[1].delta}},
            {"N", {Ns[0], Ns[1]}},
            {"residual", {r[0].residual, r[1].residual}},
            {"max_F", r[1].max_F},
            {"relative", r[1].residual / r[1].max_F},
            {"order", std::log2(r[0].residual / r[1].residual)}};
  } catch (const Error& e) {
    return error_status(e);
  }
}

Json slice_json(const Trajectory& traj, const ExperimentConfig& cfg) {
  const auto& fc = *cfg.flow;
  const double ts = cfg.rescaling.slice_time > 0.0
                        ? cfg.rescaling.slice_time
                        : std::max(traj.sigma, 0.5 * traj.checkpoints.back().t);
  Json j;
  j["t"] = ts;
  const double t_end = traj.checkpoints.back().t;
  if (!(ts > 0.0) || ts > t_end) {
    j["status"] = "SKIPPED";
    j["detail"] = "slice time outside (0, " + format_double(t_end) + "]";
    return j;
  }
  const RadialGraph* base = nullptr;
  for (const RadialGraph* g : record_graphs(traj))
    if (g->t <= ts) base = g;
  try {
    const auto g = advance_to(*base, ts, fc.cfl_geom, fc.cfl_curv);
    const auto f = compute_frame(g);
    const auto rf = continuous_rescale(f, ts);
    j["max_abs_X"] = rf.max_abs_X;
    j["weighted_area"] = weighted_area(rf);
    if (const auto* s = std::get_if<SphereShape>(&fc.shape)) {
      const double rho2 = (s->radius * s->radius - 2.0 * fc.n * ts) / ts;
      j["closed_form"] = rho2 > 0.0 ? Json(sphere_weighted_area(fc.n, std::sqrt(rho2))) : Json(nullptr);
    }
    Json enc = Json::array();
    auto compare = [&](double radius, const std::string& source) {
      Json e{{"radius", radius}, {"source", source}};
      try {
        const double one[] = {radius};
        const auto r = one_sided_check(rf, one).front();
        e["status"] = r.pass ? "PASS" : "FAIL";
        e["slice_area"] = r.slice_area;
        e["encloser_area"] = r.encloser_area;
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kNotEnclosing && err.code() != ErrorCode::kOverflowGuard) throw;
        e["status"] = std::string(to_string(err.code()));
        e["detail"] = err.what();
      }
      enc.push_back(e);
    };
    for (const double k : cfg.rescaling.encloser_factors)
      compare(k * rf.max_abs_X, format_double(k) + " max|X~|");
    for (const double r : cfg.rescaling.encloser_radii) compare(r, "absolute");
    j["enclosers"] = enc;
    j["status"] = "OK";
  } catch (const Error& e) {
    j["status"] = std::string(to_string(e.code()));
    j["detail"] = e.what();
  }
  return j;
}

Json determinism_json(const ExperimentConfig& cfg, const std::string& reference) {
  const int saved = num_threads();
  std::vector<int> threads{1, 2, max_threads()};
  Json runs = Json::array();
  bool all = true;
  try {
    for (const int k : threads) {
      set_num_threads(k);
      const auto text = monitors_csv_text(monitor_trajectory(run(*cfg.flow), cfg));
      const bool same = text == reference;
      all = all && same;
      runs.push_back({{"threads", k}, {"identical", same}, {"bytes", text.size()}});
    }
  } catch (...) {
    set_num_threads(saved);
    throw;
  }
  set_num_threads(saved);
  return {{"status", "OK"}, {"reference_bytes", reference.size()}, {"runs", runs}, {"identical", all}};
}

Json vec(std::span<const double> v) {
  Json a = Json::array();
  for (const double x : v) a.push_back(json_value(x));
  return a;
}

}  // namespace

std::vector<StarMonitorRecord> monitor_trajectory(const Trajectory& traj,
                                                  const ExperimentConfig& cfg) {
  MonitorOptions opt;
  opt.a1 = cfg.flow->a1;
  opt.a2 = cfg.flow->a2;
  opt.ladder = cfg.ladder ? *cfg.ladder : default_ladder(traj.initial_max_H);
  opt.images = cfg.images;
  opt.initial_diameter = traj.initial_diameter;
  std::vector<StarMonitorRecord> out;
  for (const RadialGraph* g : record_graphs(traj)) out.push_back(make_record(compute_frame(*g), opt));
  return out;
}

std::string monitors_csv_text(const std::vector<StarMonitorRecord>& records) {
  std::ostringstream os;
  write_monitors_csv(os, records);
  return os.str();
}

Trajectory load_trajectory(const fs::path& run_dir) {
  const Json ev = read_json_file(run_dir / "events.json");
  Trajectory traj;
  traj.terminal_event = flow_event_from_string(ev.at("event").get<std::string>());
  traj.terminal_detail = ev.at("detail").get<std::string>();
  traj.steps = ev.at("steps").get<std::size_t>();
  traj.sigma = json_double(ev.at("sigma"));
  traj.stop_Amax = json_double(ev.at("stop_Amax"));
  traj.stop_rmin = json_double(ev.at("stop_rmin"));
  traj.initial_diameter = json_double(ev.at("initial_diameter"));
  traj.initial_max_H = json_double(ev.at("initial_max_H"));
  if (!ev.at("t0").is_null()) traj.t0 = json_double(ev.at("t0"));
  if (!ev.at("t0_residual").is_null()) traj.t0_residual = json_double(ev.at("t0_residual"));
  const auto count = ev.at("checkpoints").get<std::size_t>();
  const auto& hs = ev.at("checkpoint_max_H");
  for (std::size_t k = 0; k < count; ++k) {
    const auto path = run_dir / "checkpoints" / ("ckpt_" + std::to_string(k) + ".csv");
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kMissingArtifact, path.string());
    Checkpoint c;
    c.graph = read_graph_csv(in);
    c.t = c.graph.t;
    c.max_H = json_double(hs.at(k));
    traj.checkpoints.push_back(std::move(c));
  }
  return traj;
}

TangentFlowReport blowup_from_run(const fs::path& run_dir) {
  const Trajectory traj = load_trajectory(run_dir);
  if (!traj.t0) throw Error(ErrorCode::kFitFailed, "the run has no singular-time estimate");
  return classify_tangent_flow(traj, *traj.t0, traj.t0_residual.value_or(0.0));
}

Json tangent_flow_json(const TangentFlowReport& rep) {
  Json j;
  j["classification"] = std::string(to_string(rep.classification));
  j["t0"] = rep.t0;
  j["singular_node"] = rep.singular_node;
  j["singular_x"] = rep.singular_x;
  j["singular_y"] = rep.singular_y;
  j["t"] = vec(rep.t);
  j["scales"] = vec(rep.scales);
  Json ratios = Json::array();
  for (const auto& r : rep.ratios) ratios.push_back(vec(r));
  j["ratios"] = ratios;
  j["h2_gap"] = vec(rep.h2_gap);
  j["residual_halfspace"] = json_value(rep.residual_halfspace);
  j["residual_sphere"] = json_value(rep.residual_sphere);
  j["residual_cylinder"] = json_value(rep.residual_cylinder);
  j["best_residual"] = json_value(rep.best_residual);
  j["t0_uncertainty"] = rep.t0_uncertainty;
  j["h2_gap_low"] = rep.h2_gap_low;
  j["h2_gap_high"] = rep.h2_gap_high;
  return j;
}

ArrivalRefinement arrival_refinement(const ArrivalProblem& base, double eps) {
  ArrivalRefinement out;
  out.eps = eps;
  out.M = base.M;
  ArrivalProblem p = base;
  p.eps = eps;
  out.coarse = solve_arrival(p);
  p.M = 2 * base.M;
  out.fine = solve_arrival(p);
  out.translator_order = std::log2(out.coarse.translator_defect / out.fine.translator_defect);
  out.F_order = std::log2(out.coarse.F_defect / out.fine.F_defect);
  return out;
}

Json arrival_solution_json(const ArrivalProblem& p, const ArrivalSolution& s) {
  Json j;
  j["R0"] = p.R0;
  j["n"] = p.n;
  j["sigma"] = p.sigma;
  j["M"] = p.M;
  j["eps"] = s.eps;
  j["coupling"] = std::string(to_string(p.coupling));
  j["rescaled_radius"] = p.rescaled_radius();
  j["residual"] = s.residual;
  j["residual_target"] = 1e-8 / s.eps;
  j["iterations"] = s.iterations;
  j["v0"] = s.v.front();
  j["exact_v0"] = exact_arrival(p, 0.0);
  j["sup_error"] = s.sup_error;
  j["max_grad"] = s.max_grad;
  j["c_low"] = s.c_low;
  j["c_high"] = s.c_high;
  j["translator_defect"] = s.translator_defect;
  j["F_defect"] = s.F_defect;
  j["r"] = vec(s.r);
  j["v"] = vec(s.v);
  return j;
}

Json arrival_study_json(const ArrivalProblem& p, const StudyReport& study,
                        const ArrivalRefinement& refine) {
  Json j;
  j["problem"] = {{"R0", p.R0},       {"n", p.n}, {"sigma", p.sigma}, {"M", p.M},
                  {"coupling", std::string(to_string(p.coupling))},
                  {"exact_v0", exact_arrival(p, 0.0)}};
  Json rows = Json::array();
  for (const auto& r : study.rows) {
    rows.push_back({{"eps", r.eps},
                    {"sup_error", r.sup_error},
                    {"max_grad", r.max_grad},
                    {"c_low", r.c_low},
                    {"c_high", r.c_high},
                    {"translator_defect", r.translator_defect},
                    {"F_defect", r.F_defect},
                    {"v0", r.v0},
                    {"residual", r.residual},
                    {"residual_target", 1e-8 / r.eps},
                    {"iterations", r.iterations},
                    {"alpha", json_value(r.alpha)},
                    {"v_boundary", r.v_boundary},
                    {"min_interior", r.min_interior},
                    {"max_increment", r.max_increment}});
  }
  j["rows"] = rows;
  j["errors_decreasing"] = study.errors_decreasing;
  j["grad_ratio"] = study.grad_ratio;
  j["alpha_nondecreasing"] = study.alpha_nondecreasing;
  j["alpha_smooth"] = study.alpha_smooth;
  j["alpha_limit_ok"] = study.alpha_limit_ok;
  j["refinement"] = {{"eps", refine.eps},
                     {"M", refine.M},
                     {"sup_error_coarse", refine.coarse.sup_error},
                     {"sup_error_fine", refine.fine.sup_error},
                     {"translator_coarse", refine.coarse.translator_defect},
                     {"translator_fine", refine.fine.translator_defect},
                     {"F_coarse", refine.coarse.F_defect},
                     {"F_fine", refine.fine.F_defect},
                     {"translator_order", refine.translator_order},
                     {"F_order", refine.F_order},
                     {"residual_coarse", refine.coarse.residual},
                     {"residual_target", 1e-8 / refine.eps}};
  return j;
}

std::string arrival_study_csv(const StudyReport& study) {
  std::ostringstream os;
  os << "eps,supError,maxGrad,cLow,cHigh,translatorDefect,Fdefect\n";
  for (const auto& r : study.rows) {
    os << format_double(r.eps) << "," << format_double(r.sup_error) << ","
       << format_double(r.max_grad) << "," << format_double(r.c_low) << ","
       << format_double(r.c_high) << "," << format_double(r.translator_defect) << ","
       << format_double(r.F_defect) << "\n";
  }
  return os.str();
}

PropertyReport run_experiment(const ExperimentConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  // Stale artifacts from an earlier run would be read back by the report.
  for (const char* name : {"checkpoints", "monitors.csv", "events.json", "rescaled.csv",
                           "fevolution.json", "slice.json", "tangent_flow.json",
                           "determinism.json", "arrival.json", "arrival_study.csv", "report.json"})
    fs::remove_all(out / name);
  write_json_file(out / "config.json", config_to_json(cfg));

  if (cfg.flow) {
    const Trajectory traj = run(*cfg.flow);
    fs::create_directories(out / "checkpoints");
    for (std::size_t k = 0; k < traj.checkpoints.size(); ++k) {
      std::ostringstream os;
      write_graph_csv(os, traj.checkpoints[k].graph);
      write_text_file(out / "checkpoints" / ("ckpt_" + std::to_string(k) + ".csv"), os.str());
    }
    const auto records = monitor_trajectory(traj, cfg);
    const std::string monitors = monitors_csv_text(records);
    write_text_file(out / "monitors.csv", monitors);
    write_json_file(out / "events.json", events_json(traj, records.size()));
    write_text_file(out / "rescaled.csv", rescaled_csv_text(traj));
    write_json_file(out / "fevolution.json", fevolution_json(traj, *cfg.flow));
    write_json_file(out / "slice.json", slice_json(traj, cfg));
    Json tf;
    try {
      tf = tangent_flow_json(blowup_from_run(out));
      tf["status"] = "OK";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kFitFailed && e.code() != ErrorCode::kNoBlowup &&
          e.code() != ErrorCode::kEmptyWindow)
        throw;
      tf = error_status(e);
    }
    write_json_file(out / "tangent_flow.json", tf);
    if (cfg.determinism_check) write_json_file(out / "determinism.json", determinism_json(cfg, monitors));
  }

  if (cfg.arrival.enabled) {
    const auto& p = cfg.arrival.problem;
    const auto study = convergence_study(p, cfg.arrival.eps_ladder);
    const auto refine = arrival_refinement(p, cfg.arrival.refine_eps);
    write_json_file(out / "arrival.json", arrival_study_json(p, study, refine));
    write_text_file(out / "arrival_study.csv", arrival_study_csv(study));
  }

  const PropertyReport report = evaluate_properties(out);
  write_json_file(out / "report.json", report.to_json());
  return report;
}

}  // namespace starflow
