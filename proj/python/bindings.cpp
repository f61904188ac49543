#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "degfrac/cli.hpp"
#include "degfrac/expr.hpp"
#include "degfrac/fode.hpp"
#include "degfrac/solver.hpp"
#include "degfrac/specfn.hpp"
#include "degfrac/spectral.hpp"

namespace py = pybind11;
using namespace degfrac;

namespace {

spectral::ProblemSpec make_problem(const std::string& K, int s, const std::vector<std::string>& p, const std::string& phi,
                                   double alpha, double beta) {
    cli::RunConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.s = s;
    cfg.K = K;
    cfg.p = p.empty() ? std::vector<std::string>(static_cast<std::size_t>(s), "0") : p;
    cfg.phi = phi;
    return cfg.problem();
}

py::dict eigs(const std::string& K, int s, const std::vector<std::string>& p, std::size_t points, std::size_t modes) {
    const auto spec = make_problem(K, s, p, "0", 0.5, 0.0);
    const auto grid = spectral::Grid::uniform(points, spec.s);
    const auto op = spectral::build_operator(spec, grid);
    const auto sp = spectral::solve_eigs(op, modes);
    py::dict out;
    out["y"] = grid.nodes();
    out["lambda"] = sp.lambda;
    out["Y"] = sp.Y;
    out["near_degenerate"] = sp.near_degenerate;
    return out;
}

py::dict l1_solve(double lambda, double alpha, double beta, std::size_t intervals, double x_max,
                  std::optional<double> grading, double x0) {
    const auto grid = fode::XGrid::graded(intervals, x_max, grading.value_or(fode::default_grading(alpha)));
    const auto sol = fode::caputo_l1_solve(lambda, alpha, beta, grid, x0);
    py::dict out;
    out["x"] = std::vector<double>(grid.nodes().begin(), grid.nodes().end());
    out["X"] = sol.values;
    return out;
}

// The solve pipeline without file output: spectrum, coefficients, truncation, field, residual.
py::dict solve(const std::string& config_json) {
    const cli::RunConfig cfg = cli::RunConfig::parse(config_json);
    const auto spec = cfg.problem();
    const auto grid = spectral::Grid::uniform(cfg.grid.ny, spec.s);
    const auto op = spectral::build_operator(spec, grid);
    const std::size_t modes = std::min(cfg.modes, spectral::max_reliable_modes(grid.size()));
    const auto sp = spectral::solve_eigs(op, modes);
    const auto coeffs = solver::fourier_coeffs(spec, sp, op, grid);
    const auto kernel = spectral::green_kernel(op, grid);
    const auto trunc = solver::select_truncation(coeffs, spectral::kernel_row_norms(kernel, op), cfg.tolerance);
    const auto xgrid = fode::XGrid::graded(cfg.grid.nx, cfg.grid.x_max, cfg.grading());
    auto field = solver::assemble(spec, sp, coeffs, xgrid, grid, trunc.N);
    field.epsilon = trunc.epsilon;
    field.capped = trunc.capped;
    const auto res = solver::residual(field, spec, op, xgrid, grid);

    py::dict out;
    out["x"] = field.x;
    out["y"] = field.y;
    out["u"] = field.u;
    out["lambda"] = sp.lambda;
    out["phi_n"] = coeffs.phi;
    out["N"] = trunc.N;
    out["epsilon"] = trunc.epsilon;
    out["capped"] = trunc.capped;
    out["amplitude_bound"] = field.amplitude_bound;
    out["residual_l2"] = res.l2_interior;
    out["residual_scale"] = res.scale;
    out["initial_defect"] = res.initial_defect;
    return out;
}

py::tuple selftest() {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::cmd_selftest(out, err);
    return py::make_tuple(code, out.str() + err.str());
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Eigenfunction-expansion solver for degenerate time-fractional equations";

    py::register_exception<cli::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<spectral::ResolutionError>(m, "ResolutionError", PyExc_ValueError);
    py::register_exception<expr::ParseError>(m, "ExpressionError", PyExc_ValueError);

    m.def(
        "kilbas_saigo", [](double alpha, double mm, double l, double z) { return specfn::kilbas_saigo({alpha, mm, l}, z); },
        py::arg("alpha"), py::arg("m"), py::arg("l"), py::arg("z"), "E_{alpha,m,l}(z) for z <= 0.");
    m.def(
        "mittag_leffler", [](double alpha, double z) { return specfn::mittag_leffler(alpha, z); }, py::arg("alpha"), py::arg("z"), "E_alpha(z) for z <= 0.");
    m.def("ks_solution", &fode::ks_solution, py::arg("phi_n"), py::arg("lambda_n"), py::arg("alpha"), py::arg("beta"),
          py::arg("x"), "Closed-form mode amplitude phi_n E_{alpha, 1+beta/alpha, beta/alpha}(-lambda_n x^(alpha+beta)).");
    m.def("caputo_l1_solve", &l1_solve, py::arg("lam"), py::arg("alpha"), py::arg("beta"), py::arg("intervals") = 4096,
          py::arg("x_max") = 1.0, py::arg("grading") = py::none(), py::arg("x0") = 1.0,
          "L1 solution of D^alpha X = -lam x^beta X on a graded grid; returns {'x', 'X'}.");
    m.def("eigs", &eigs, py::arg("K") = "1", py::arg("s") = 1, py::arg("p") = std::vector<std::string>{},
          py::arg("points") = 1000, py::arg("modes") = 10,
          "Lowest eigenpairs of l(Y) = lambda Y / K; returns {'y', 'lambda', 'Y', 'near_degenerate'}.");
    m.def("_solve_json", &solve, py::arg("config_json"));
    m.def("selftest", &selftest, "Runs the built-in benchmark matrix; returns (exit_code, report).");
}
