#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "fmuxnet/errors.hpp"
#include "fmuxnet/flows.hpp"
#include "fmuxnet/fmux_function.hpp"
#include "fmuxnet/harness.hpp"
#include "fmuxnet/io.hpp"

namespace py = pybind11;
using namespace fmuxnet;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.loads.
std::string analyze_json(const std::string& graph, std::optional<std::string> schedules,
                         std::optional<std::string> trees, const std::string& function, int k,
                         int alphabet, const std::string& rate_units) {
  NetworkGraph g = graph_from_json(json::parse(graph));
  FmuxFunction f(parse_function_spec(function, k, alphabet));
  std::optional<ScheduleSet> s;
  if (schedules) s = schedules_from_json(g, json::parse(*schedules));
  std::vector<AggregationTree> t =
      trees ? trees_from_json(g, json::parse(*trees)).trees : enumerate_aggregation_trees(g);
  py::gil_scoped_release release;
  return analysis_to_json(analyze(g, s ? &*s : nullptr, t, f, rate_units)).dump();
}

py::tuple simulate_json(const std::string& config, double lambda, std::uint64_t seed,
                        const std::string& base_dir) {
  ExperimentConfig c = ExperimentConfig::from_json(json::parse(config), base_dir);
  c.lambdas = {lambda};
  c.seeds = {seed};
  c.output_dir.clear();
  c.validate();
  RunResult r;
  json summary;
  {
    py::gil_scoped_release release;
    Experiment e = prepare_experiment(c, base_dir);
    r = run_point(e, c, lambda, seed);
    summary = run_summary(r);
    summary["delta_star"] = e.delta_star;
    summary["lambda_star"] = e.lambda_star;
  }
  return py::make_tuple(summary.dump(), r.csv);
}

std::string sweep_json(const std::string& config, const std::string& base_dir) {
  ExperimentConfig c = ExperimentConfig::from_json(json::parse(config), base_dir);
  py::gil_scoped_release release;
  return sweep(c, base_dir).summary.dump();
}

std::string verify_json(const std::string& suite, std::uint64_t seed) {
  py::gil_scoped_release release;
  return verify(suite, VerifyOptions{seed}).dump();
}

py::dict stability(const std::vector<double>& times, const std::vector<double>& totals,
                   double lambda, int node_count, std::size_t window_samples, double cap_factor) {
  StabilityParams p;
  p.window_samples = window_samples;
  p.cap_factor = cap_factor;
  StabilityVerdict v = detect_stability(times, totals, lambda, node_count, p);
  py::dict d;
  d["verdict"] = verdict_name(v.verdict);
  d["slope"] = v.slope;
  d["max_queue"] = v.max_queue;
  d["eps_stable"] = v.eps_stable;
  d["eps_unstable"] = v.eps_unstable;
  d["queue_cap"] = v.queue_cap;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "fmuxnet native core";

  py::register_exception<Error>(m, "FmuxError");
  py::register_exception<nlohmann::json::exception>(m, "DocumentError", PyExc_ValueError);

  py::class_<FmuxFunction>(m, "Function")
      .def(py::init([](const std::string& name, int k, int alphabet_size) {
             return FmuxFunction(parse_function_spec(name, k, alphabet_size));
           }),
           py::arg("name"), py::arg("k") = 2, py::arg("alphabet_size") = 16)
      .def_property_readonly("name", &FmuxFunction::name)
      .def_property_readonly("range_size", &FmuxFunction::range_size)
      .def_property_readonly("bits_per_packet", &FmuxFunction::bits_per_packet)
      .def("evaluate", [](const FmuxFunction& f, const std::vector<int>& values) {
        return f.offline_evaluate(values);
      })
      .def("combine_all", [](const FmuxFunction& f, const std::vector<int>& values) {
        return f.finalize(f.lift_and_combine(values));
      })
      .def("check_divisible", [](const FmuxFunction& f,
                                 const std::vector<std::vector<std::size_t>>& partition,
                                 const std::vector<int>& values) {
        return f.check_divisible(partition, values);
      });

  m.def("analyze", &analyze_json, py::arg("graph"), py::arg("schedules") = py::none(),
        py::arg("trees") = py::none(), py::arg("function") = "parity", py::arg("k") = 2,
        py::arg("alphabet_size") = 16, py::arg("rate_units") = "packets");
  m.def("simulate", &simulate_json, py::arg("config"), py::arg("lam"), py::arg("seed"),
        py::arg("base_dir") = "");
  m.def("sweep", &sweep_json, py::arg("config"), py::arg("base_dir") = "");
  m.def("verify", &verify_json, py::arg("suite") = "all", py::arg("seed") = 1);
  m.def("detect_stability", &stability, py::arg("times"), py::arg("totals"), py::arg("lam"),
        py::arg("node_count"), py::arg("window_samples") = 100, py::arg("cap_factor") = 50.0);
}
