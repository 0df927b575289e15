#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cvahedge/closed_forms.hpp"
#include "cvahedge/cva.hpp"
#include "cvahedge/harness.hpp"
#include "cvahedge/hedging.hpp"
#include "cvahedge/scenario.hpp"

namespace py = pybind11;
using namespace cvahedge;

namespace {

py::dict estimate_dict(const Estimate& e)
{
    py::dict d;
    d["value"] = e.value;
    d["std_error"] = e.std_error;
    d["n_paths"] = e.n_paths;
    return d;
}

CauchySpec spec_for(const Portfolio& p, std::size_t c, const std::array<double, 3>& alpha)
{
    if (c > p.claims.size()) throw py::index_error("claim index out of range");
    return CauchySpec{alpha, c == p.claims.size() ? p.counterparty_cds : p.claims[c]};
}

DefaultState state_of(const Scenario& s, std::uint32_t bits) { return DefaultState(s.model.n_names, bits); }

}  // namespace

PYBIND11_MODULE(_cvahedge, m)
{
    m.doc() = "Monte-Carlo pricing, CVA and GKW hedging for interacting default intensities";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);
    py::register_exception<EstimatorError>(m, "EstimatorError", PyExc_RuntimeError);

    py::class_<Scenario>(m, "Scenario")
        .def_property_readonly("n_names", [](const Scenario& s) { return s.model.n_names; })
        .def_property("seed", [](const Scenario& s) { return s.sim.seed; },
                      [](Scenario& s, std::uint64_t v) { s.sim.seed = v; s.finalize(); })
        .def_property("threads", [](const Scenario& s) { return s.sim.threads; },
                      [](Scenario& s, std::size_t v) { s.sim.threads = v; s.finalize(); })
        .def_property("n_paths", [](const Scenario& s) { return s.sim.n_paths; },
                      [](Scenario& s, std::size_t v) { s.sim.n_paths = v; s.finalize(); })
        .def_property("estimator_paths", [](const Scenario& s) { return s.estimator.n_paths; },
                      [](Scenario& s, std::size_t v) { s.estimator.n_paths = v; s.finalize(); })
        .def_property("output_dir", [](const Scenario& s) { return s.output_dir; },
                      [](Scenario& s, const std::string& v) { s.output_dir = v; })
        .def_property("mode", [](const Scenario& s) { return to_string(s.mode); },
                      [](Scenario& s, const std::string& v) { s.mode = mode_from_string(v); })
        .def_property_readonly("horizon", [](const Scenario& s) { return s.sim.horizon; })
        .def_property_readonly("initial_intensity", [](const Scenario& s) { return s.model.initial_intensity; })
        .def_property_readonly("claim_count", [](const Scenario& s) { return s.portfolio.claims.size(); })
        .def("to_json", &serialize_scenario)
        .def("__eq__", [](const Scenario& a, const Scenario& b) { return a == b; });

    m.def("parse_scenario", &parse_scenario, py::arg("text"));
    m.def("load_scenario", &load_scenario, py::arg("path"));

    m.def(
        "run",
        [](const Scenario& s) {
            std::ostringstream log;
            int code;
            {
                py::gil_scoped_release release;
                code = run(s, log);
            }
            return py::make_tuple(code, log.str());
        },
        py::arg("scenario"), "run the scenario's mode; returns (exit code, log)");

    m.def(
        "simulate",
        [](const Scenario& s, std::size_t path_index) {
            RandomStream rng(s.sim.seed, stream_id(StreamDomain::market, path_index));
            const MarketPath p = simulate_market(s.model, s.sim, rng);
            py::dict d;
            d["times"] = p.times;
            d["intensities"] = p.intensities;
            d["states"] = p.states;
            d["compensators"] = p.compensators;
            d["default_times"] = p.default_times;
            return d;
        },
        py::arg("scenario"), py::arg("path_index") = 0);

    m.def(
        "price",
        [](const Scenario& s, std::size_t claim, double t, std::vector<double> x, std::uint32_t state,
           const std::string& method, std::array<double, 3> alpha) {
            const Portfolio p = s.portfolio.build(s.model.n_names);
            const CauchySpec spec = spec_for(p, claim, alpha);
            if (x.empty()) x = s.model.initial_intensity;
            Estimate e;
            {
                py::gil_scoped_release release;
                if (method == "direct") e = estimate_F_direct(s.model, spec, t, x, state_of(s, state), s.estimator);
                else if (method == "recursive")
                    e = estimate_F_recursive(s.model, spec, t, x, state_of(s, state), s.estimator);
                else throw ConfigError("method must be 'direct' or 'recursive'");
            }
            return estimate_dict(e);
        },
        py::arg("scenario"), py::arg("claim") = 0, py::arg("t") = 0.0, py::arg("x") = std::vector<double>{},
        py::arg("state") = 0u, py::arg("method") = "recursive", py::arg("alpha") = std::array<double, 3>{1, 1, 1},
        "claim value F; claim == claim_count selects the counterparty CDS");

    m.def(
        "oracle",
        [](const Scenario& s, const std::string& quantity, double t, std::vector<double> x, std::uint32_t state) {
            const Portfolio p = s.portfolio.build(s.model.n_names);
            if (!oracle_supports(p)) throw ConfigError("no closed form for this portfolio");
            OracleQuantity q = OracleQuantity::claim;
            if (quantity == "counterparty_cds") q = OracleQuantity::counterparty_cds;
            else if (quantity == "g") q = OracleQuantity::g;
            else if (quantity != "claim") throw ConfigError("quantity must be claim, counterparty_cds or g");
            if (x.empty()) x = s.model.initial_intensity;
            OracleConfig oc;
            oc.maturity = s.sim.horizon;
            oc.dt = s.estimator.dt;
            oc.n_paths = s.estimator.n_paths;
            oc.seed = s.sim.seed;
            oc.threads = s.sim.threads;
            Estimate e;
            {
                py::gil_scoped_release release;
                e = portfolio_oracle(s.model, p, q, state_of(s, state), t, x, oc);
            }
            return estimate_dict(e);
        },
        py::arg("scenario"), py::arg("quantity") = "claim", py::arg("t") = 0.0, py::arg("x") = std::vector<double>{},
        py::arg("state") = 0u);

    m.def(
        "cva",
        [](const Scenario& s) {
            const Portfolio p = s.portfolio.build(s.model.n_names);
            Estimate e;
            {
                py::gil_scoped_release release;
                e = cva_value(s.model, p, 0.0, s.model.initial_intensity, DefaultState(s.model.n_names),
                              s.estimator);
            }
            return estimate_dict(e);
        },
        py::arg("scenario"), "CVA at time 0 with nested claim values");

    m.def("cds_constant_intensity", &cds_constant_intensity, py::arg("loss"), py::arg("spread"), py::arg("intensity"),
          py::arg("tau"));
}
