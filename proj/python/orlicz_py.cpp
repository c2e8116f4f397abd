#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "orlicz/io.hpp"
#include "orlicz/modular.hpp"
#include "orlicz/nfunc.hpp"
#include "orlicz/scenarios.hpp"
#include "orlicz/smooth.hpp"

namespace py = pybind11;
using namespace orlicz;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  if (o.is_none()) return nlohmann::json::object();
  const auto text = py::module_::import("json").attr("dumps")(o).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::dict report_dict(const VerificationReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["passed"] = r.passed;
  d["samples"] = r.samples;
  d["violations"] = r.violations;
  d["max_excess"] = r.max_excess;
  d["detail"] = r.detail;
  return d;
}

Field sampled_1d(const std::vector<double>& values, double lo, double hi) {
  if (values.empty()) throw DomainError("values must not be empty");
  return Field::sampled(Domain::interval(lo, hi), GridShape{{static_cast<int>(values.size())}},
                        Arity{}, values, "samples");
}

}  // namespace

PYBIND11_MODULE(orlicz, m) {
  m.doc() = "Orlicz-space numerical lab";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SaturationError>(m, "SaturationError", PyExc_OverflowError);
  py::register_exception<PlanFailure>(m, "PlanFailure", PyExc_RuntimeError);
  py::register_exception<BracketFailure>(m, "BracketFailure", PyExc_RuntimeError);

  py::class_<NFunction>(m, "NFunction")
      .def_static("parse", &NFunction::parse, py::arg("descriptor"))
      .def_static("exp_star", &NFunction::exp_star)
      .def_static("exp_gamma_tau", &NFunction::exp_gamma_tau, py::arg("gamma"), py::arg("tau"))
      .def_static("exp_gamma_tau_star", &NFunction::exp_gamma_tau_star, py::arg("gamma"),
                  py::arg("tau"))
      .def_static("tilde_exp", &NFunction::tilde_exp, py::arg("gamma"), py::arg("tau"))
      .def_static("power", &NFunction::power, py::arg("p"))
      .def_static("exp_alpha_star", &NFunction::exp_alpha_star, py::arg("alpha"))
      .def("__call__", &NFunction::eval, py::arg("t"))
      .def("eval", &NFunction::eval, py::arg("t"))
      .def("deriv1", &NFunction::deriv1, py::arg("t"))
      .def("deriv2", &NFunction::deriv2, py::arg("t"))
      .def("scaled", &NFunction::scaled, py::arg("lam"))
      .def("strictly_convex", &NFunction::strictly_convex)
      .def("known_subadditivity_constant", &NFunction::known_subadditivity_constant)
      .def("__str__", &NFunction::to_string)
      .def("__repr__", [](const NFunction& f) { return "NFunction('" + f.to_string() + "')"; });

  m.def("find_tau0", &find_tau0);
  m.def("tau0_defect", &tau0_defect, py::arg("tau"));

  m.def(
      "check_weak_subadditivity",
      [](const NFunction& phi, double k, const std::vector<std::pair<double, double>>& pairs) {
        return report_dict(check_weak_subadditivity(phi, k, pairs));
      },
      py::arg("phi"), py::arg("k"), py::arg("pairs"));

  m.def(
      "classify_delta2",
      [](const NFunction& phi, double lo, double hi, bool finite_measure) {
        const auto r = classify_delta2(phi, lo, hi, finite_measure);
        py::dict d;
        d["classification"] = std::string(delta2_class_name(r.classification));
        d["max_ratio"] = r.max_ratio;
        d["delta_regular"] = r.delta_regular;
        return d;
      },
      py::arg("phi"), py::arg("lo"), py::arg("hi"), py::arg("finite_measure") = true);

  m.def(
      "modular",
      [](const NFunction& phi, const std::string& field, int cells,
         const std::vector<double>& singular, int grading_depth) {
        QuadratureSpec q;
        q.cells = {cells};
        for (double s : singular) q.singular.push_back({0, s});
        q.grading_depth = grading_depth;
        const auto v = modular(phi, scenarios::make_field(field), q);
        py::dict d;
        d["value"] = v.value;
        d["diverged"] = v.diverged;
        return d;
      },
      py::arg("phi"), py::arg("field"), py::arg("cells") = 128,
      py::arg("singular") = std::vector<double>{}, py::arg("grading_depth") = 0,
      "Modular of a registered field recipe.");

  m.def(
      "sampled_modular",
      [](const NFunction& phi, const std::vector<double>& values, double lo, double hi) {
        return modular(phi, sampled_1d(values, lo, hi), QuadratureSpec{}).value;
      },
      py::arg("phi"), py::arg("values"), py::arg("lo") = 0.0, py::arg("hi") = 1.0,
      "Modular of cell values on a uniform grid of (lo, hi).");

  m.def(
      "luxemburg_norm",
      [](const NFunction& phi, const std::vector<double>& values, double lo, double hi,
         double tol) { return luxemburg_norm(phi, sampled_1d(values, lo, hi), {}, tol); },
      py::arg("phi"), py::arg("values"), py::arg("lo") = 0.0, py::arg("hi") = 1.0,
      py::arg("tol") = 1e-9, "Luxemburg norm of cell values on a uniform grid of (lo, hi).");

  m.def("field_recipes", [] {
    std::vector<std::string> out;
    for (const auto& r : scenarios::field_recipes()) out.push_back(r.name);
    return out;
  });

  m.def(
      "smoothing_plan",
      [](const std::string& b, const std::string& phi, double delta, const std::string& weight,
         int j_max) {
        const Field f = scenarios::make_field(b);
        SmoothingOptions o;
        o.j_max = j_max;
        py::gil_scoped_release release;
        const auto plan = choose_radii(f, NFunction::parse(phi),
                                       scenarios::make_weight(weight, f.domain()), delta, o);
        py::gil_scoped_acquire acquire;
        return to_py(plan.to_json());
      },
      py::arg("b") = "tsin3x", py::arg("phi") = "exp_star", py::arg("delta") = 1e-2,
      py::arg("weight") = "one", py::arg("j_max") = SmoothingOptions{}.j_max);

  m.def("scenarios", [] {
    std::vector<std::string> out;
    for (const auto& s : scenarios::list()) out.push_back(s.name);
    return out;
  });
  m.def(
      "default_config", [](const std::string& name) { return to_py(scenarios::default_config(name)); },
      py::arg("name"));
  m.def(
      "run_scenario",
      [](const std::string& name, const py::object& config) {
        const auto cfg = from_py(config);
        nlohmann::json out;
        {
          py::gil_scoped_release release;
          out = scenarios::run(name, cfg).to_json();
        }
        return to_py(out);
      },
      py::arg("name"), py::arg("config") = py::none());
}
