// Python bindings: campaigns, replay, evidence and the mapping queries. JSON
// values cross the boundary as Python objects via the json module.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "isoforge/certmap.hpp"
#include "isoforge/cli.hpp"
#include "isoforge/errors.hpp"
#include "isoforge/evidence.hpp"
#include "isoforge/monitor.hpp"
#include "isoforge/orchestrator.hpp"
#include "isoforge/vm_interface.hpp"
#include "isoforge/workloads.hpp"

namespace py = pybind11;
using namespace isoforge;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  if (py::isinstance<py::str>(o)) return nlohmann::json::parse(o.cast<std::string>());
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

struct PyResults {
  CampaignResults results;

  std::string digest() const { return results.digest(); }
  std::size_t violations() const { return results.violation_count(); }
  std::size_t cases() const { return results.cases.size(); }
  py::object evidence() const { return to_py(evidence_document(results)); }
  std::string evidence_text(const std::string& format) const {
    auto f = parse_evidence_format(format);
    if (!f) throw ConfigError("format must be human or machine");
    return emit_evidence(results, *f);
  }
  std::string results_log() const {
    std::ostringstream out;
    write_results_log(results, out);
    return out.str();
  }
  py::list case_summaries() const {
    py::list out;
    for (const auto& c : results.cases) {
      py::dict d;
      d["id"] = c.planned.id;
      d["technique"] = std::string(to_string(c.planned.technique));
      d["status"] = std::string(to_string(c.status));
      d["trace_digest"] = c.trace_digest;
      d["violations"] = c.report.violations.size();
      out.append(d);
    }
    return out;
  }
};

PyResults run(const py::object& campaign, std::optional<std::size_t> parallelism) {
  const Campaign c = load_campaign(from_py(campaign));
  RunOptions options;
  options.parallelism = parallelism;
  py::gil_scoped_release release;
  return PyResults{run_campaign(c, options)};
}

}  // namespace

PYBIND11_MODULE(isoforge, m) {
  m.doc() = "Isolation assessment for a simulated partitioning hypervisor";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<UnknownSfr>(m, "UnknownSfr", base.ptr());
  py::register_exception<UnknownSar>(m, "UnknownSar", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<PyResults>(m, "CampaignResults")
      .def_property_readonly("digest", &PyResults::digest)
      .def_property_readonly("violations", &PyResults::violations)
      .def_property_readonly("cases", &PyResults::cases)
      .def("evidence", &PyResults::evidence, "Machine evidence document as a dict")
      .def("evidence_text", &PyResults::evidence_text, py::arg("format") = "human")
      .def("results_log", &PyResults::results_log, "NDJSON results log")
      .def("case_summaries", &PyResults::case_summaries);

  m.def("run_campaign", &run, py::arg("campaign"), py::arg("parallelism") = py::none(),
        "Run a campaign given as a dict or JSON text");

  m.def(
      "replay",
      [](const std::string& log, std::uint64_t case_id) {
        std::istringstream in(log);
        const auto r = replay_case(in, case_id);
        py::dict d;
        d["found"] = r.found;
        d["matches"] = r.matches;
        d["stored_digest"] = r.stored_digest;
        d["replayed_digest"] = r.replayed_digest;
        return d;
      },
      py::arg("log"), py::arg("case_id"));

  m.def(
      "report",
      [](const std::string& log, const std::string& format) {
        std::istringstream in(log);
        const auto doc = evidence_document(read_results_log(in));
        return format == "machine" ? doc.dump(2) + "\n" : render_human(doc);
      },
      py::arg("log"), py::arg("format") = "human");

  m.def("surface_catalog", [] { return to_py(nlohmann::json::parse(export_catalog())); });

  m.def(
      "parse_script",
      [](const std::string& text) {
        py::list out;
        const auto tc = parse_script(text);
        std::istringstream lines(render_script(tc.steps));
        for (std::string line; std::getline(lines, line);) out.append(line);
        return out;
      },
      py::arg("text"), "Parse a step script; returns its normalised lines");

  m.def("mechanisms_for_sfr", [](const std::string& ref) { return builtin_certmap().mechanisms_for_sfr(ref).to_string(); });
  m.def("sfrs_for_mechanism", [](const std::string& mech) {
    auto parsed = parse_mechanism(mech);
    if (!parsed) throw ConfigError("unknown mechanism '" + mech + "'");
    return builtin_certmap().sfrs_for_mechanism(*parsed);
  });
  m.def("techniques_for_sar", [](const std::string& ref) {
    std::vector<std::string> out;
    for (const auto& t : builtin_certmap().techniques_for_sar(ref)) out.push_back(describe(t));
    return out;
  });

  m.def("estimate_capacity", &estimate_capacity, py::arg("bits"), py::arg("latencies"));

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line front end; returns (exit_code, stdout, stderr)");
}
