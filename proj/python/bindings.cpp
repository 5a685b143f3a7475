#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "snwe/cli_io.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::dict solve_path(const std::string& config_json, std::size_t path)
{
    const snwe::RunConfig rc = snwe::parse_config(json::parse(config_json));
    const snwe::SolveResult r = snwe::MildSolver(rc.solver_config()).solve_truncated(path);
    std::vector<double> times(r.trajectory.nodes());
    for (std::size_t k = 0; k < times.size(); ++k) times[k] = r.trajectory.time(k);

    py::dict out;
    out["t"] = times;
    out["u"] = r.trajectory.u;
    out["ut"] = r.trajectory.ut;
    out["z"] = r.trajectory.z_running;
    out["y"] = r.trajectory.y_running;
    out["iterations"] = r.diagnostics.iterations;
    out["ratios"] = r.diagnostics.ratios;
    out["residual"] = r.diagnostics.residual;
    out["converged"] = r.diagnostics.converged;
    return out;
}

py::tuple run_config(const std::string& config_json, const std::string& output_dir)
{
    snwe::RunConfig rc = snwe::parse_config(json::parse(config_json));
    if (!output_dir.empty()) rc.output_dir = output_dir;
    std::ostringstream log;
    const snwe::RunOutcome o = snwe::run(rc, log);
    return py::make_tuple(o.exit_code, o.manifest.to_json().dump(), log.str());
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    // later registrations are tried first, so the subclass goes last
    py::register_exception<snwe::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<snwe::ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.attr("version") = snwe::kToolVersion;
    m.def("admissible_r", &snwe::admissible_r, py::arg("p"), py::arg("q"));
    m.def("cluster_exponent", &snwe::cluster_exponent, py::arg("q"));
    m.def("pair_condition", &snwe::validate_pair_condition, py::arg("q"), py::arg("r"));

    m.def(
        "basis_modes",
        [](double lx, double ly, const std::string& bc, double cutoff) {
            const auto b = snwe::build_basis(lx, ly, snwe::boundary_from_string(bc), cutoff);
            std::vector<std::pair<int, int>> modes;
            for (const snwe::Mode& md : b->modes()) modes.emplace_back(md.jx, md.jy);
            const std::vector<double> freqs(b->frequencies().begin(), b->frequencies().end());
            return py::make_tuple(modes, freqs);
        },
        py::arg("lx"), py::arg("ly"), py::arg("bc"), py::arg("cutoff"));

    m.def(
        "config_hash",
        [](const std::string& config_json) { return snwe::config_hash(snwe::parse_config(json::parse(config_json))); },
        py::arg("config_json"));
    m.def(
        "canonical_config",
        [](const std::string& config_json) {
            return snwe::canonical_config(snwe::parse_config(json::parse(config_json))).dump();
        },
        py::arg("config_json"));
    m.def("solve_path", &solve_path, py::arg("config_json"), py::arg("path") = 0);
    m.def("run", &run_config, py::arg("config_json"), py::arg("output_dir") = "");
}
