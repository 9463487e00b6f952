// Python bindings. Samples cross the boundary as JSON text; the Python
// package converts to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "netdt/datagen.hpp"
#include "netdt/errors.hpp"
#include "netdt/model.hpp"
#include "netdt/network.hpp"
#include "netdt/sample_io.hpp"
#include "netdt/simulator.hpp"
#include "netdt/topogen.hpp"

namespace py = pybind11;
using namespace netdt;

namespace {

NetworkSample parse(const std::string& text) { return sample_from_json(nlohmann::json::parse(text)); }

std::string dump(const NetworkSample& s) { return sample_to_json(s).dump(); }

std::string generate(std::size_t nodes, std::uint64_t seed) {
  return dump(generate_topology(default_topo_config(nodes, seed)));
}

std::string route_all_pairs(const std::string& text) {
  NetworkSample s = parse(text);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId a = 0; a < s.nodes; ++a) {
    for (NodeId b = 0; b < s.nodes; ++b) {
      if (a != b) pairs.emplace_back(a, b);
    }
  }
  s.flows = route_shortest_paths(s, pairs);
  return dump(s);
}

std::string traffic(const std::string& text, double intensity, std::uint64_t seed) {
  return dump(sample_traffic(parse(text), intensity, seed));
}

std::vector<std::string> validate(const std::string& text) {
  std::vector<std::string> out;
  for (const Violation& v : validate_sample(parse(text)).violations) {
    out.push_back(std::string(to_string(v.kind)) + ": " + v.message);
  }
  return out;
}

std::string label(const std::string& text, double warmup, double measure, std::uint64_t seed) {
  NetworkSample s = parse(text);
  SimConfig cfg;
  cfg.warmup = warmup;
  cfg.measure = measure;
  cfg.seed = seed;
  s.labels = simulate(s, cfg);
  return dump(s);
}

struct Model {
  ModelParams params;

  py::dict predict_sample(const std::string& text) const {
    const NetworkSample s = parse(text);
    const ValidationReport report = validate_sample(s);
    if (!report.ok()) {
      const Violation& v = report.violations.front();
      throw ValidationError(std::string(to_string(v.kind)) + ": " + v.message);
    }
    const Prediction p = predict(s, params);
    py::dict out;
    out["delay"] = p.delay;
    out["occupancy"] = p.occupancy;
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Network delay model, packet simulator and topology generator";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("generate_topology", &generate, py::arg("nodes"), py::arg("seed") = 1);
  m.def("route_all_pairs", &route_all_pairs, py::arg("sample"));
  m.def("sample_traffic", &traffic, py::arg("sample"), py::arg("intensity"), py::arg("seed") = 1);
  m.def("validate", &validate, py::arg("sample"));
  m.def("simulate", &label, py::arg("sample"), py::arg("warmup") = 10.0, py::arg("measure") = 100.0,
        py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());

  py::class_<Model>(m, "Model")
      .def(py::init([](std::size_t hidden, std::size_t iterations, std::uint64_t seed) {
             ModelConfig cfg;
             cfg.hidden = hidden;
             cfg.t_iters = iterations;
             return Model{ModelParams(cfg, FeatureScaling{}, seed)};
           }),
           py::arg("hidden") = 32, py::arg("iterations") = 8, py::arg("seed") = 1)
      .def_static("load", [](const std::filesystem::path& p) { return Model{load_checkpoint(p)}; })
      .def("save", [](const Model& self, const std::filesystem::path& p) { save_checkpoint(p, self.params); })
      .def("predict", &Model::predict_sample, py::arg("sample"))
      .def_property_readonly("hidden", [](const Model& self) { return self.params.config.hidden; })
      .def_property_readonly("iterations", [](const Model& self) { return self.params.config.t_iters; });
}
