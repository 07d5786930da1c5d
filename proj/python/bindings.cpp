#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "starflow/arrival.hpp"
#include "starflow/error.hpp"
#include "starflow/experiment.hpp"
#include "starflow/flow.hpp"
#include "starflow/geometry.hpp"
#include "starflow/monitors.hpp"
#include "starflow/parallel.hpp"
#include "starflow/rescaling.hpp"

namespace py = pybind11;
using namespace starflow;

namespace {

py::array_t<double> array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::dict frame_dict(const SurfaceFrame& f) {
  py::dict d;
  d["x"] = array(f.x);
  d["y"] = array(f.y);
  d["nu_x"] = array(f.nu_x);
  d["nu_y"] = array(f.nu_y);
  d["H"] = array(f.H);
  d["A2"] = array(f.A2);
  d["support"] = array(f.support);
  d["lambda_min"] = array(f.lambda_min);
  d["lambda_max"] = array(f.lambda_max);
  d["dmu"] = array(f.dmu);
  d["diameter"] = f.diameter;
  d["area"] = f.total_area();
  return d;
}

// Round-trips through the JSON text so Python receives plain dicts.
py::object to_python(const Json& j) {
  return py::module_::import("json").attr("loads")(dump_json(j));
}

}  // namespace

PYBIND11_MODULE(_starflow, m) {
  m.doc() = "Star-shaped mean curvature flow laboratory";

  py::register_exception<Error>(m, "StarflowError", PyExc_RuntimeError);

  py::class_<RadialGraph>(m, "RadialGraph")
      .def_readonly("n", &RadialGraph::n)
      .def_property_readonly("mode", [](const RadialGraph& g) { return std::string(to_string(g.mode)); })
      .def_property_readonly("r", [](const RadialGraph& g) { return array(g.r); })
      .def_readonly("t", &RadialGraph::t)
      .def_property_readonly("spacing", &RadialGraph::spacing)
      .def("__len__", &RadialGraph::size);

  m.def("sphere", [](int n, std::size_t N, double radius) { return build_shape(SphereShape{radius}, n, N); },
        py::arg("n"), py::arg("N"), py::arg("radius") = 1.0);
  m.def("perturbed_sphere",
        [](int n, std::size_t N, double amplitude, int frequency, double radius) {
          return build_shape(PerturbedSphereShape{amplitude, frequency, radius}, n, N);
        },
        py::arg("n"), py::arg("N"), py::arg("amplitude") = 0.2, py::arg("frequency") = 3,
        py::arg("radius") = 1.0);
  m.def("ellipse", [](std::size_t N, double a, double b) { return build_shape(EllipseShape{a, b}, 1, N); },
        py::arg("N"), py::arg("a") = 2.0, py::arg("b") = 1.0);
  m.def("dumbbell",
        [](int n, std::size_t N, double bulb_radius, double neck_radius) {
          DumbbellShape s;
          s.bulb_radius = bulb_radius;
          s.neck_radius = neck_radius;
          return build_shape(s, n, N);
        },
        py::arg("n"), py::arg("N"), py::arg("bulb_radius") = 1.0, py::arg("neck_radius") = 0.15);

  m.def("compute_frame", [](const RadialGraph& g) { return frame_dict(compute_frame(g)); });
  m.def("star_gauge", [](const RadialGraph& g) { return star_gauge(compute_frame(g)); });
  m.def("select_dt", &select_dt, py::arg("g"), py::arg("cfl_geom") = 0.2, py::arg("cfl_curv") = 0.2);
  m.def("step", &step, py::arg("g"), py::arg("dt"));
  m.def("advance_to", &advance_to, py::arg("g"), py::arg("t"), py::arg("cfl_geom") = 0.2,
        py::arg("cfl_curv") = 0.2);

  m.def("compute_F",
        [](const RadialGraph& g, double a1, double a2) { return array(compute_F(compute_frame(g), g.t, a1, a2)); },
        py::arg("g"), py::arg("a1") = 1.0, py::arg("a2") = 0.0);
  m.def("noncollapsing",
        [](const RadialGraph& g, double a1, double a2, std::size_t images) {
          const auto f = compute_frame(g);
          const auto r = noncollapsing_report(compute_Z_extremes(f, images), compute_F(f, g.t, a1, a2));
          py::dict d;
          d["min_Zstar_over_F"] = r.z_star_over_F_min;
          d["max_Zsup_over_F"] = r.z_sup_over_F_max;
          d["alpha_int"] = r.alpha_int;
          d["alpha_ext"] = r.alpha_ext;
          return d;
        },
        py::arg("g"), py::arg("a1") = 1.0, py::arg("a2") = 0.0, py::arg("images") = kDefaultImages);
  m.def("weighted_area", [](const RadialGraph& g) { return weighted_area(continuous_rescale(compute_frame(g), g.t)); });
  m.def("sphere_weighted_area", &sphere_weighted_area, py::arg("n"), py::arg("R"));

  m.def("solve_arrival",
        [](double R0, int n, double sigma, double eps, std::size_t M, const std::string& coupling) {
          ArrivalProblem p;
          p.R0 = R0;
          p.n = n;
          p.sigma = sigma;
          p.eps = eps;
          p.M = M;
          p.coupling = height_coupling_from_string(coupling);
          p.validate();
          return to_python(arrival_solution_json(p, solve_arrival(p)));
        },
        py::arg("R0") = 1.0, py::arg("n") = 2, py::arg("sigma") = 0.1, py::arg("eps") = 0.05,
        py::arg("M") = 1024, py::arg("coupling") = "product");

  m.def("run_experiment",
        [](const std::filesystem::path& config, const std::filesystem::path& out) {
          Json j;
          {
            py::gil_scoped_release release;
            j = run_experiment(parse_config(config), out).to_json();
          }
          return to_python(j);
        },
        py::arg("config"), py::arg("out"));
  m.def("evaluate_properties",
        [](const std::filesystem::path& run_dir) { return to_python(evaluate_properties(run_dir).to_json()); },
        py::arg("run_dir"));

  m.def("set_num_threads", &set_num_threads, py::arg("threads"));
  m.def("max_threads", &max_threads);
}
