#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "starflow/error.hpp"
#include "starflow/experiment.hpp"
#include "starflow/numfmt.hpp"
#include "starflow/parallel.hpp"

namespace fs = std::filesystem;
using namespace starflow;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("starflow_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode config_error(const std::string& text, std::string* what = nullptr) {
  try {
    config_from_json(Json::parse(text));
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

const char* kSmallSphere = R"({
  "name": "small_sphere",
  "flow": {"shape": {"kind": "sphere", "radius": 1.0}, "n": 2, "N": 48, "monitor_every": 50,
           "stop_rmin": 0.05},
  "monitors": {"images": 16},
  "rescaling": {"slice_time": 0.1},
  "expect": {"tangent_flow": "SPHERE"},
  "determinism_check": true
})";

}  // namespace

TEST_CASE("format_double round-trips at 17 digits") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = std::ldexp(u(rng), static_cast<int>(u(rng)));
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(std::isnan(parse_double("nan")));
  bool threw = false;
  try {
    parse_double("1.5x");
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kParseError;
  }
  CHECK(threw);
}

TEST_CASE("dump_json writes non-finite values as strings and reads them back") {
  Json j;
  j["a"] = json_value(std::numeric_limits<double>::infinity());
  j["b"] = 0.1;
  const auto back = Json::parse(dump_json(j));
  CHECK(json_double(back["a"]) == std::numeric_limits<double>::infinity());
  CHECK(json_double(back["b"]) == 0.1);
}

TEST_CASE("monitors.csv round-trips exactly") {
  StarMonitorRecord r;
  r.t = 0.125;
  r.tau = std::log(0.125);
  r.min_F = 0.7;
  r.alpha_ext = std::numeric_limits<double>::infinity();
  r.m = {0.1, 0.2, 0.3, std::numeric_limits<double>::infinity()};
  std::stringstream ss;
  write_monitors_csv(ss, {r, r});
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header == kMonitorsHeader);
  const auto back = read_monitors_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].tau == r.tau);
  CHECK(back[1].alpha_ext == r.alpha_ext);
  CHECK(back[1].m == r.m);
}

TEST_CASE("parse_config: sphere fixture") {
  const auto cfg = parse_config(fs::path(STARFLOW_FIXTURE_DIR) / "sphere.json");
  REQUIRE(cfg.flow);
  CHECK(cfg.flow->n == 2);
  CHECK(cfg.flow->N == 256);
  CHECK(cfg.expect_tangent_flow == TangentFlow::kSphere);
}

TEST_CASE("parse_config: a1 = a2 = 0 is a VALIDATION_ERROR naming a1+a2") {
  std::string what;
  const auto code = config_error(
      R"({"flow": {"shape": {"kind": "sphere"}, "a1": 0.0, "a2": 0.0}})", &what);
  CHECK(code == ErrorCode::kValidationError);
  CHECK(what.find("a1+a2") != std::string::npos);
}

TEST_CASE("parse_config: missing stop_rmin gets the 3 h min r0 default, noted in the echo") {
  const auto cfg = config_from_json(Json::parse(R"({"flow": {"shape": {"kind": "sphere"}, "N": 64}})"));
  const double h = build_shape(SphereShape{1.0}, 2, 64).spacing();
  CHECK(cfg.flow->stop_rmin == doctest::Approx(3.0 * h));
  bool noted = false;
  for (const auto& s : cfg.defaults_applied) noted = noted || s.find("stop_rmin") != std::string::npos;
  CHECK(noted);
  const Json echo = config_to_json(cfg);
  CHECK(echo.contains("defaults_applied"));
}

TEST_CASE("parse_config: unknown fields, bad values and malformed files") {
  std::string what;
  CHECK(config_error(R"({"flow": {"shape": {"kind": "sphere"}, "NN": 64}})", &what) ==
        ErrorCode::kValidationError);
  CHECK(what.find("flow.NN") != std::string::npos);
  CHECK(config_error(R"({"flow": {"shape": {"kind": "torus"}}})") == ErrorCode::kValidationError);
  CHECK(config_error(R"({"flow": {"shape": {"kind": "sphere"}, "N": 8}})") == ErrorCode::kValidationError);
  CHECK(config_error(R"({"name": "no flow"})") == ErrorCode::kValidationError);

  const auto dir = scratch("badjson");
  write_text_file(dir / "bad.json", "{\"flow\": ");
  bool threw = false;
  try {
    parse_config(dir / "bad.json");
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kParseError;
  }
  CHECK(threw);
}

TEST_CASE("config_to_json parses back to the same config") {
  const auto cfg = parse_config(fs::path(STARFLOW_FIXTURE_DIR) / "dumbbell.json");
  const Json a = config_to_json(cfg);
  const Json b = config_to_json(config_from_json(a));
  CHECK(dump_json(a) == dump_json(b));
}

TEST_CASE("run_experiment: small sphere passes every evaluated property") {
  const auto cfg = config_from_json(Json::parse(kSmallSphere));
  const auto dir = scratch("sphere_run");
  const auto rep = run_experiment(cfg, dir);
  for (const auto& p : rep.properties) {
    INFO(p.name << ": " << p.detail);
    CHECK(p.status != PropertyStatus::kFail);
  }
  CHECK(rep.properties.size() == declared_properties().size());
  REQUIRE(rep.find("determinism"));
  CHECK(rep.find("determinism")->status == PropertyStatus::kPass);
  for (const char* f : {"config.json", "monitors.csv", "events.json", "rescaled.csv", "slice.json",
                        "tangent_flow.json", "report.json"})
    CHECK(fs::exists(dir / f));

  // Re-evaluation from disk reproduces the report.
  const auto again = evaluate_properties(dir);
  CHECK(dump_json(again.to_json()) == dump_json(rep.to_json()));

  // A tampered minF row is reported as FAIL with its row index.
  std::ifstream in(dir / "monitors.csv");
  auto rec = read_monitors_csv(in);
  in.close();
  REQUIRE(rec.size() > 3);
  rec[2].min_F = -0.5;
  std::ofstream out(dir / "monitors.csv");
  write_monitors_csv(out, rec);
  out.close();
  const auto bad = evaluate_properties(dir);
  const auto* p = bad.find("F_positive_records");
  REQUIRE(p);
  CHECK(p->status == PropertyStatus::kFail);
  REQUIRE(p->index);
  CHECK(*p->index == 2);
  CHECK(bad.any_fail());
}

TEST_CASE("run_experiment: t_max = 0 skips the time-dependent properties") {
  auto j = Json::parse(kSmallSphere);
  j["flow"]["t_max"] = 0.0;
  j["determinism_check"] = false;
  j.erase("rescaling");
  const auto rep = run_experiment(config_from_json(j), scratch("tmax0"));
  CHECK_FALSE(rep.any_fail());
  for (const char* name : {"F_evolution", "noncollapsing_monotone", "rescaled_identity", "tangent_flow",
                           "sphere_extinction_time"}) {
    INFO(name);
    REQUIRE(rep.find(name));
    CHECK(rep.find(name)->status == PropertyStatus::kSkip);
  }
}

TEST_CASE("run_experiment: no blowup window skips the classifier") {
  auto j = Json::parse(kSmallSphere);
  j["flow"]["t_max"] = 0.02;
  j["determinism_check"] = false;
  j["rescaling"]["slice_time"] = 0.01;
  const auto rep = run_experiment(config_from_json(j), scratch("noblowup"));
  REQUIRE(rep.find("tangent_flow"));
  CHECK(rep.find("tangent_flow")->status == PropertyStatus::kSkip);
  CHECK_FALSE(rep.any_fail());
}

TEST_CASE("evaluate_properties: missing artifacts") {
  const auto dir = scratch("empty");
  bool threw = false;
  try {
    evaluate_properties(dir);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kMissingArtifact;
  }
  CHECK(threw);
}

TEST_CASE("declared properties have unique names and descriptive anchors") {
  std::set<std::string> names;
  for (const auto& p : declared_properties()) {
    CHECK(names.insert(p.name).second);
    CHECK(std::string(p.anchor).size() > 0);
  }
}

TEST_CASE("parallel_for rethrows the exception of the smallest failing index") {
  set_num_threads(2);
  std::vector<int> out(1000, 0);
  try {
    parallel_for(out.size(), [&](std::size_t i) {
      if (i == 700 || i == 300) throw std::runtime_error(std::to_string(i));
      out[i] = 1;
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "300");
  }
  set_num_threads(0);
}
