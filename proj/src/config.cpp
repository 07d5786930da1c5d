#include <algorithm>
#include <cmath>
#include <set>

#include "starflow/error.hpp"
#include "starflow/experiment.hpp"
#include "starflow/numfmt.hpp"

namespace starflow {

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::kValidationError, path + ": " + msg);
}

// Object reader that rejects keys nobody asked for.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) invalid(path_.empty() ? "(root)" : path_, "must be an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, val] : j_.items())
      if (!seen_.count(key)) invalid(at(key), "unknown field");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_number(const Json& j, const std::string& path) {
  try {
    return json_double(j);
  } catch (const Error&) {
    invalid(path, "must be a number");
  }
}

std::uint64_t as_count(const Json& j, const std::string& path) {
  const double v = as_number(j, path);
  if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e15) invalid(path, "must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

bool as_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) invalid(path, "must be true or false");
  return j.get<bool>();
}

std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) invalid(path, "must be a string");
  return j.get<std::string>();
}

std::vector<double> as_numbers(const Json& j, const std::string& path) {
  if (!j.is_array()) invalid(path, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void read_number(Fields& f, const std::string& key, double& out) {
  if (const Json* v = f.get(key)) out = as_number(*v, f.at(key));
}

ShapeSpec parse_shape(const Json& j, const std::string& path) {
  Fields f(j, path);
  const Json* kind = f.get("kind");
  if (!kind) invalid(f.at("kind"), "required");
  const std::string k = as_string(*kind, f.at("kind"));
  ShapeSpec spec;
  if (k == "sphere") {
    SphereShape s;
    read_number(f, "radius", s.radius);
    spec = s;
  } else if (k == "perturbed_sphere") {
    PerturbedSphereShape s;
    read_number(f, "amplitude", s.amplitude);
    read_number(f, "radius", s.radius);
    if (const Json* v = f.get("frequency"))
      s.frequency = static_cast<int>(as_count(*v, f.at("frequency")));
    spec = s;
  } else if (k == "ellipse") {
    EllipseShape s;
    read_number(f, "a", s.a);
    read_number(f, "b", s.b);
    spec = s;
  } else if (k == "dumbbell") {
    DumbbellShape s;
    read_number(f, "bulb_radius", s.bulb_radius);
    read_number(f, "neck_radius", s.neck_radius);
    read_number(f, "sharpness", s.sharpness);
    read_number(f, "slope", s.slope);
    read_number(f, "taper", s.taper);
    spec = s;
  } else {
    invalid(f.at("kind"), "unknown shape '" + k + "'");
  }
  f.finish();
  return spec;
}

Json shape_json(const ShapeSpec& spec) {
  Json j;
  j["kind"] = shape_name(spec);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SphereShape>) {
          j["radius"] = s.radius;
        } else if constexpr (std::is_same_v<T, PerturbedSphereShape>) {
          j["amplitude"] = s.amplitude;
          j["frequency"] = s.frequency;
          j["radius"] = s.radius;
        } else if constexpr (std::is_same_v<T, EllipseShape>) {
          j["a"] = s.a;
          j["b"] = s.b;
        } else {
          j["bulb_radius"] = s.bulb_radius;
          j["neck_radius"] = s.neck_radius;
          j["sharpness"] = s.sharpness;
          j["slope"] = s.slope;
          j["taper"] = s.taper;
        }
      },
      spec);
  return j;
}

// Re-throws a nested validation error with the enclosing path prefixed.
template <typename Fn>
void with_prefix(const std::string& prefix, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kValidationError) throw;
    std::string msg = e.what();
    const std::string tag = std::string(to_string(ErrorCode::kValidationError)) + ": ";
    if (msg.rfind(tag, 0) == 0) msg = msg.substr(tag.size());
    throw Error(ErrorCode::kValidationError, prefix + "." + msg);
  }
}

FlowConfig parse_flow(const Json& j, std::vector<std::string>& notes) {
  Fields f(j, "flow");
  FlowConfig c;
  const Json* shape = f.get("shape");
  if (!shape) invalid(f.at("shape"), "required");
  c.shape = parse_shape(*shape, f.at("shape"));
  if (const Json* v = f.get("n")) c.n = static_cast<int>(as_count(*v, f.at("n")));
  if (const Json* v = f.get("N")) c.N = as_count(*v, f.at("N"));
  read_number(f, "cfl_geom", c.cfl_geom);
  read_number(f, "cfl_curv", c.cfl_curv);
  read_number(f, "stop_Amax", c.stop_Amax);
  read_number(f, "stop_rmin", c.stop_rmin);
  read_number(f, "t_max", c.t_max);
  if (const Json* v = f.get("monitor_every")) c.monitor_every = as_count(*v, f.at("monitor_every"));
  read_number(f, "a1", c.a1);
  read_number(f, "a2", c.a2);
  f.finish();
  with_prefix("flow", [&] { c.validate(); });

  if (c.stop_Amax <= 0.0 || c.stop_rmin <= 0.0) {
    RadialGraph g;
    try {
      g = build_shape(c.shape, c.n, c.N);
    } catch (const Error& e) {
      invalid("flow.shape", e.what());
    }
    const auto [lo, hi] = std::minmax_element(g.r.begin(), g.r.end());
    if (c.stop_Amax <= 0.0) {
      c.stop_Amax = 1000.0 / *hi;
      notes.push_back("flow.stop_Amax: 1000 / max r0 = " + format_double(c.stop_Amax));
    }
    if (c.stop_rmin <= 0.0) {
      c.stop_rmin = 3.0 * g.spacing() * *lo;
      notes.push_back("flow.stop_rmin: 3 h min r0 = " + format_double(c.stop_rmin));
    }
  }
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) invalid("name", "must not be empty");
  if (flow) with_prefix("flow", [&] { flow->validate(); });
  if (ladder) {
    for (std::size_t k = 0; k < kLadderSize; ++k) {
      if (!((*ladder)[k] > 0.0)) invalid("monitors.ladder", "thresholds must be positive");
      if (k > 0 && !((*ladder)[k] > (*ladder)[k - 1]))
        invalid("monitors.ladder", "thresholds must increase");
    }
  }
  if (images < 1) invalid("monitors.images", "must be at least 1");
  for (const double f : rescaling.encloser_factors)
    if (!(f > 0.0)) invalid("rescaling.encloser_factors", "must be positive");
  for (const double r : rescaling.encloser_radii)
    if (!(r > 0.0)) invalid("rescaling.encloser_radii", "must be positive");
  if (arrival.enabled) {
    with_prefix("arrival", [&] { arrival.problem.validate(); });
    if (arrival.eps_ladder.empty()) invalid("arrival.eps_ladder", "must not be empty");
    for (const double e : arrival.eps_ladder)
      if (!(e > 0.0)) invalid("arrival.eps_ladder", "must be positive");
    if (!(arrival.refine_eps > 0.0)) invalid("arrival.refine_eps", "must be positive");
  }
  if (!flow && !arrival.enabled) invalid("flow", "required unless arrival.enabled is true");
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig cfg;
  Fields f(j, "");
  if (const Json* v = f.get("name")) cfg.name = as_string(*v, "name");
  if (const Json* v = f.get("flow")) cfg.flow = parse_flow(*v, cfg.defaults_applied);

  if (const Json* v = f.get("monitors")) {
    Fields m(*v, "monitors");
    if (const Json* l = m.get("ladder")) {
      const auto vals = as_numbers(*l, m.at("ladder"));
      if (vals.size() != kLadderSize) invalid(m.at("ladder"), "must have 4 thresholds");
      Ladder lad{};
      std::copy(vals.begin(), vals.end(), lad.begin());
      cfg.ladder = lad;
    }
    if (const Json* im = m.get("images")) cfg.images = as_count(*im, m.at("images"));
    m.finish();
  }
  if (!cfg.ladder && cfg.flow) {
    try {
      const auto fr = compute_frame(build_shape(cfg.flow->shape, cfg.flow->n, cfg.flow->N));
      cfg.ladder = default_ladder(*std::max_element(fr.H.begin(), fr.H.end()));
    } catch (const Error& e) {
      invalid("flow.shape", e.what());
    }
    cfg.defaults_applied.push_back("monitors.ladder: {0.5, 1, 2, 3} x initial max H");
  }

  if (const Json* v = f.get("rescaling")) {
    Fields r(*v, "rescaling");
    read_number(r, "slice_time", cfg.rescaling.slice_time);
    if (const Json* e = r.get("encloser_factors"))
      cfg.rescaling.encloser_factors = as_numbers(*e, r.at("encloser_factors"));
    if (const Json* e = r.get("encloser_radii"))
      cfg.rescaling.encloser_radii = as_numbers(*e, r.at("encloser_radii"));
    r.finish();
  }
  if (cfg.flow && cfg.rescaling.slice_time <= 0.0)
    cfg.defaults_applied.push_back("rescaling.slice_time: max(sigma, t_final / 2) of the run");

  if (const Json* v = f.get("arrival")) {
    Fields a(*v, "arrival");
    auto& p = cfg.arrival.problem;
    if (const Json* e = a.get("enabled")) cfg.arrival.enabled = as_bool(*e, a.at("enabled"));
    if (const Json* e = a.get("domain")) {
      const auto d = as_string(*e, a.at("domain"));
      if (d != "sphere") invalid(a.at("domain"), "only 'sphere' is implemented");
    }
    read_number(a, "R0", p.R0);
    if (const Json* e = a.get("n")) p.n = static_cast<int>(as_count(*e, a.at("n")));
    read_number(a, "sigma", p.sigma);
    if (const Json* e = a.get("M")) p.M = as_count(*e, a.at("M"));
    read_number(a, "eps", p.eps);
    if (const Json* e = a.get("max_iter")) p.max_iter = static_cast<int>(as_count(*e, a.at("max_iter")));
    if (const Json* e = a.get("coupling")) {
      try {
        p.coupling = height_coupling_from_string(as_string(*e, a.at("coupling")));
      } catch (const Error& err) {
        if (err.code() == ErrorCode::kValidationError) throw;
        invalid(a.at("coupling"), "must be 'product' or 'graph'");
      }
    }
    if (const Json* e = a.get("eps_ladder")) cfg.arrival.eps_ladder = as_numbers(*e, a.at("eps_ladder"));
    read_number(a, "refine_eps", cfg.arrival.refine_eps);
    a.finish();
  }

  if (const Json* v = f.get("expect")) {
    Fields e(*v, "expect");
    if (const Json* t = e.get("tangent_flow")) {
      const auto s = as_string(*t, e.at("tangent_flow"));
      try {
        cfg.expect_tangent_flow = tangent_flow_from_string(s);
      } catch (const Error&) {
        invalid(e.at("tangent_flow"), "unknown classification '" + s + "'");
      }
    }
    e.finish();
  }
  if (const Json* v = f.get("determinism_check")) cfg.determinism_check = as_bool(*v, "determinism_check");
  if (const Json* v = f.get("seed")) cfg.seed = as_count(*v, "seed");
  if (const Json* v = f.get("output_dir")) cfg.output_dir = as_string(*v, "output_dir");
  if (const Json* v = f.get("defaults_applied")) {
    if (!v->is_array()) invalid("defaults_applied", "must be an array of strings");
    // Notes from an echoed config; defaults are already resolved there.
    for (const auto& s : *v) {
      const auto note = as_string(s, "defaults_applied");
      if (std::find(cfg.defaults_applied.begin(), cfg.defaults_applied.end(), note) ==
          cfg.defaults_applied.end())
        cfg.defaults_applied.push_back(note);
    }
  }
  f.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  if (cfg.flow) {
    const auto& c = *cfg.flow;
    Json f;
    f["shape"] = shape_json(c.shape);
    f["n"] = c.n;
    f["N"] = c.N;
    f["cfl_geom"] = c.cfl_geom;
    f["cfl_curv"] = c.cfl_curv;
    f["stop_Amax"] = c.stop_Amax;
    f["stop_rmin"] = c.stop_rmin;
    f["t_max"] = json_value(c.t_max);
    f["monitor_every"] = c.monitor_every;
    f["a1"] = c.a1;
    f["a2"] = c.a2;
    j["flow"] = f;
  }
  Json m;
  if (cfg.ladder) m["ladder"] = Json(std::vector<double>(cfg.ladder->begin(), cfg.ladder->end()));
  m["images"] = cfg.images;
  j["monitors"] = m;
  j["rescaling"] = {{"slice_time", cfg.rescaling.slice_time},
                    {"encloser_factors", cfg.rescaling.encloser_factors},
                    {"encloser_radii", cfg.rescaling.encloser_radii}};
  const auto& p = cfg.arrival.problem;
  j["arrival"] = {{"enabled", cfg.arrival.enabled},
                  {"domain", "sphere"},
                  {"R0", p.R0},
                  {"n", p.n},
                  {"sigma", p.sigma},
                  {"M", p.M},
                  {"eps", p.eps},
                  {"max_iter", p.max_iter},
                  {"coupling", std::string(to_string(p.coupling))},
                  {"eps_ladder", cfg.arrival.eps_ladder},
                  {"refine_eps", cfg.arrival.refine_eps}};
  Json e = Json::object();
  if (cfg.expect_tangent_flow) e["tangent_flow"] = std::string(to_string(*cfg.expect_tangent_flow));
  j["expect"] = e;
  j["determinism_check"] = cfg.determinism_check;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["defaults_applied"] = cfg.defaults_applied;
  return j;
}

}  // namespace starflow
