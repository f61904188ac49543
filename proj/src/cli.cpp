#include "degfrac/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "degfrac/expr.hpp"
#include "degfrac/fode.hpp"
#include "degfrac/solver.hpp"
#include "degfrac/specfn.hpp"

namespace degfrac::cli {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kTopKeys{"alpha", "beta", "s", "K", "p", "phi", "grid", "modes", "tolerance", "output"};
const std::vector<std::string> kGridKeys{"ny", "nx", "r", "x_max"};

double get_real(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path + key, "must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path + key, "must be finite");
    return v;
}

long long get_integer(const json& j, const std::string& key, const std::string& path) {
    if (j.is_number_integer()) return j.get<long long>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) return static_cast<long long>(v);
    }
    throw ConfigError(path + key, "must be an integer");
}

std::string get_string(const json& j, const std::string& key) {
    if (!j.is_string()) throw ConfigError(key, "must be a string");
    return j.get<std::string>();
}

void reject_unknown(const json& obj, const std::vector<std::string>& allowed, const std::string& path) {
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw ConfigError(path + item.key(), "unknown key");
        }
    }
}

expr::Expr parse_expr(const std::string& source, const std::string& key) {
    try {
        return expr::Expr::parse(source, "y");
    } catch (const expr::ParseError& e) {
        throw ConfigError(key, std::string("invalid expression: ") + e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// Runs a command body and maps exceptions to exit codes.
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: config key " << e.what() << '\n';
        return kExitConfig;
    } catch (const spectral::InvalidProblem& e) {
        err << "error: config key " << e.what() << '\n';
        return kExitConfig;
    } catch (const fode::InvalidGrid& e) {
        err << "error: config key grid: " << e.what() << '\n';
        return kExitConfig;
    } catch (const specfn::InvalidArgument& e) {
        err << "error: invalid argument: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

json hypotheses_json(const solver::HypothesisReport& rep) {
    json arr = json::array();
    for (const auto& c : rep.checks) {
        arr.push_back({{"name", c.name},
                       {"status", c.passed ? "pass" : "warn"},
                       {"magnitude", c.magnitude},
                       {"threshold", c.threshold},
                       {"detail", c.detail}});
    }
    return arr;
}

void warn_hypotheses(const solver::HypothesisReport& rep, std::ostream& err) {
    for (const auto& c : rep.checks) {
        if (!c.passed) {
            err << "warning: hypothesis not met: " << c.name << " (measured " << expr::format_double(c.magnitude)
                << ", threshold " << expr::format_double(c.threshold) << ")\n";
        }
    }
}

std::size_t reliable_count(std::size_t requested, std::size_t ny, std::ostream& err) {
    const std::size_t limit = spectral::max_reliable_modes(ny);
    if (requested > limit) {
        err << "warning: " << requested << " modes requested but ny=" << ny << " resolves at most " << limit
            << "; using " << limit << '\n';
        return limit;
    }
    return requested;
}

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool upper = true; ///< pass when value <= threshold (else value >= threshold)
    bool passed() const { return upper ? value <= threshold : value >= threshold; }
};

json checks_json(const std::vector<Check>& checks) {
    json arr = json::array();
    for (const auto& c : checks) {
        arr.push_back({{"name", c.name},
                       {"value", c.value},
                       {"threshold", c.threshold},
                       {"comparison", c.upper ? "<=" : ">="},
                       {"pass", c.passed()}});
    }
    return arr;
}

int report_checks(const std::vector<Check>& checks, std::ostream& out, std::ostream& err) {
    const Check* first_failure = nullptr;
    for (const auto& c : checks) {
        out << (c.passed() ? "PASS " : "FAIL ") << c.name << ": " << expr::format_double(c.value)
            << (c.upper ? " <= " : " >= ") << expr::format_double(c.threshold) << '\n';
        if (!c.passed() && first_failure == nullptr) first_failure = &c;
    }
    if (first_failure != nullptr) {
        err << "error: check failed: " << first_failure->name << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

double weighted_orthonormality_defect(const spectral::Spectrum& sp, const spectral::DiscreteOperator& op) {
    double worst = 0.0;
    for (std::size_t a = 0; a < sp.count(); ++a) {
        for (std::size_t b = a; b < sp.count(); ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < op.size(); ++i) {
                acc += op.W(i) * sp.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) *
                       sp.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
            }
            worst = std::max(worst, std::abs(acc - (a == b ? 1.0 : 0.0)));
        }
    }
    return worst;
}

// max_j |L1 - closed form| / |x0| for one mode.
double mode_cross_check(double lambda, double alpha, double beta, double x_max, std::size_t steps) {
    const auto grid = fode::XGrid::graded(steps, x_max, fode::default_grading(alpha));
    const auto l1 = fode::caputo_l1_solve(lambda, alpha, beta, grid, 1.0);
    const double g = alpha + beta;
    const specfn::KSEvaluator ks(specfn::KSParams::from_mode_equation(alpha, beta), lambda * std::pow(x_max, g));
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double t = std::min(lambda * std::pow(grid[j], g), ks.t_max());
        worst = std::max(worst, std::abs(l1.values[j] - ks(t)));
    }
    return worst;
}

// Largest violation of 0 < E(-t) <= 1 and of monotone decay on a geometric sample of [0, t_max].
double ks_boundedness_violation(const specfn::KSEvaluator& ks) {
    double worst = 0.0;
    double prev = 1.0;
    const double t_max = ks.t_max();
    if (!(t_max > 0.0)) return 0.0;
    for (double t = std::min(1e-3, t_max);; t = std::min(t * 1.1, t_max)) {
        const double v = ks(t);
        if (!(v > 0.0)) worst = std::max(worst, std::abs(v) + 1e-300);
        worst = std::max({worst, v - 1.0, v - prev});
        prev = v;
        if (t >= t_max) break;
    }
    return worst;
}

struct Pipeline {
    RunConfig cfg;
    spectral::ProblemSpec spec;
    spectral::Grid grid;
    spectral::DiscreteOperator op;
    solver::HypothesisReport hypotheses;
    spectral::Spectrum spectrum;
    spectral::Kernel kernel;
    std::vector<double> row_norms;
    solver::CoefficientSet coeffs;
    solver::Truncation truncation;
    fode::XGrid xgrid;
    solver::Field field;
    solver::ResidualReport residual;
};

Pipeline run_pipeline(const std::string& path, std::ostream& err) {
    RunConfig cfg = RunConfig::load(path);
    spectral::ProblemSpec spec = cfg.problem();
    spectral::Grid grid = spectral::Grid::uniform(cfg.grid.ny, spec.s);
    solver::HypothesisReport hyp = solver::check_hypotheses(spec, grid);
    warn_hypotheses(hyp, err);
    spectral::DiscreteOperator op = spectral::build_operator(spec, grid);
    fode::XGrid xgrid = fode::XGrid::graded(cfg.grid.nx, cfg.grid.x_max, cfg.grading());
    const std::size_t modes = reliable_count(cfg.modes, cfg.grid.ny, err);
    spectral::Spectrum spectrum = spectral::solve_eigs(op, modes);
    spectral::Kernel kernel = spectral::green_kernel(op, grid);
    std::vector<double> rn = spectral::kernel_row_norms(kernel, op);
    solver::CoefficientSet coeffs = solver::fourier_coeffs(spec, spectrum, op, grid);
    solver::Truncation tr = solver::select_truncation(coeffs, rn, cfg.tolerance);
    if (tr.capped) {
        err << "warning: tolerance " << expr::format_double(cfg.tolerance) << " not reached with " << tr.N
            << " modes (bound " << expr::format_double(tr.epsilon) << "); truncation capped at the spectrum size\n";
    }
    solver::Field field = solver::assemble(spec, spectrum, coeffs, xgrid, grid, tr.N);
    field.epsilon = tr.epsilon;
    field.capped = tr.capped;
    solver::ResidualReport res = solver::residual(field, spec, op, xgrid, grid);
    return Pipeline{std::move(cfg),    std::move(spec),   std::move(grid),  std::move(op),     std::move(hyp),
                    std::move(spectrum), std::move(kernel), std::move(rn),    std::move(coeffs), tr,
                    std::move(xgrid),  std::move(field),  std::move(res)};
}

json residual_json(const solver::ResidualReport& r) {
    return {{"max_interior", r.max_interior},
            {"l2_interior", r.l2_interior},
            {"scale", r.scale},
            {"boundary_defect", r.boundary_defect},
            {"initial_defect", r.initial_defect}};
}

double max_abs_field(const solver::Field& f) { return f.u.size() == 0 ? 0.0 : f.u.cwiseAbs().maxCoeff(); }

} // namespace

RunConfig RunConfig::parse(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config", "top level must be a JSON object");
    reject_unknown(doc, kTopKeys, "");

    RunConfig cfg;
    for (const char* required : {"alpha", "beta", "s", "K", "p", "phi"}) {
        if (!doc.contains(required)) throw ConfigError(required, "missing required key");
    }
    cfg.alpha = get_real(doc["alpha"], "alpha", "");
    cfg.beta = get_real(doc["beta"], "beta", "");
    const long long s = get_integer(doc["s"], "s", "");
    if (s < 1 || s > 16) throw ConfigError("s", "must be an integer between 1 and 16");
    cfg.s = static_cast<int>(s);
    cfg.K = get_string(doc["K"], "K");
    cfg.phi = get_string(doc["phi"], "phi");
    const json& p = doc["p"];
    if (!p.is_array()) throw ConfigError("p", "must be an array of s expression strings");
    cfg.p.clear();
    for (const auto& item : p) cfg.p.push_back(get_string(item, "p"));
    if (cfg.p.size() != static_cast<std::size_t>(cfg.s)) {
        throw ConfigError("p", "needs exactly s = " + std::to_string(cfg.s) + " entries p_0..p_{s-1}");
    }

    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        if (!g.is_object()) throw ConfigError("grid", "must be an object");
        reject_unknown(g, kGridKeys, "grid.");
        if (g.contains("ny")) {
            const long long v = get_integer(g["ny"], "ny", "grid.");
            if (v < 1) throw ConfigError("grid.ny", "must be positive");
            cfg.grid.ny = static_cast<std::size_t>(v);
        }
        if (g.contains("nx")) {
            const long long v = get_integer(g["nx"], "nx", "grid.");
            if (v < 1) throw ConfigError("grid.nx", "must be positive");
            cfg.grid.nx = static_cast<std::size_t>(v);
        }
        if (g.contains("r")) cfg.grid.r = get_real(g["r"], "r", "grid.");
        if (g.contains("x_max")) cfg.grid.x_max = get_real(g["x_max"], "x_max", "grid.");
    }
    if (doc.contains("modes")) {
        const long long v = get_integer(doc["modes"], "modes", "");
        if (v < 1) throw ConfigError("modes", "must be a positive integer");
        cfg.modes = static_cast<std::size_t>(v);
    }
    if (doc.contains("tolerance")) cfg.tolerance = get_real(doc["tolerance"], "tolerance", "");
    if (doc.contains("output")) cfg.output = get_string(doc["output"], "output");

    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha", "must lie in (0,1)");
    if (!(cfg.beta > -cfg.alpha)) throw ConfigError("beta", "must exceed -alpha");
    if (cfg.grid.ny < static_cast<std::size_t>(4 * cfg.s + 1)) {
        throw ConfigError("grid.ny", "must be at least 4s+1 = " + std::to_string(4 * cfg.s + 1));
    }
    if (cfg.grid.nx < 8) throw ConfigError("grid.nx", "must be at least 8");
    if (!(cfg.grid.r == 0.0 || cfg.grid.r >= 1.0)) throw ConfigError("grid.r", "grading exponent must be >= 1");
    if (!(cfg.grid.x_max > 0.0)) throw ConfigError("grid.x_max", "must be positive");
    if (!(cfg.tolerance > 0.0)) throw ConfigError("tolerance", "must be positive");
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) { return parse(read_file(path)); }

spectral::ProblemSpec RunConfig::problem() const {
    spectral::ProblemSpec spec;
    spec.alpha = alpha;
    spec.beta = beta;
    spec.s = s;
    spec.K = parse_expr(K, "K");
    spec.p.clear();
    for (std::size_t j = 0; j < p.size(); ++j) spec.p.push_back(parse_expr(p[j], "p"));
    spec.phi = parse_expr(phi, "phi");
    spec.m = spectral::estimate_degeneracy(spec.K);
    spec.validate();
    return spec;
}

void write_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, target);
}

int cmd_solve(const std::string& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Pipeline pl = run_pipeline(config_path, err);
        const double umax = max_abs_field(pl.field);
        const bool bounded = umax <= pl.field.amplitude_bound * (1.0 + 1e-12) + 1e-300;
        if (!bounded) err << "warning: |u| exceeds the amplitude bound sum |phi_n| max|Y_n|\n";

        double lambda_phi_sq = 0.0;
        for (std::size_t n = 0; n < pl.truncation.N; ++n) lambda_phi_sq += pl.coeffs.lambda_phi[n] * pl.coeffs.lambda_phi[n];
        json diag = {
            {"problem",
             {{"alpha", pl.cfg.alpha},
              {"beta", pl.cfg.beta},
              {"s", pl.cfg.s},
              {"m", pl.spec.m},
              {"K", pl.cfg.K},
              {"p", pl.cfg.p},
              {"phi", pl.cfg.phi}}},
            {"grid", {{"ny", pl.cfg.grid.ny}, {"nx", pl.cfg.grid.nx}, {"r", pl.cfg.grading()}, {"x_max", pl.cfg.grid.x_max}}},
            {"modes_computed", pl.spectrum.count()},
            {"lambda", pl.spectrum.lambda},
            {"near_degenerate", pl.spectrum.near_degenerate},
            {"truncation",
             {{"N", pl.truncation.N},
              {"epsilon", pl.truncation.epsilon},
              {"capped", pl.truncation.capped},
              {"tolerance", pl.cfg.tolerance}}},
            {"coefficients",
             {{"phi_n", pl.coeffs.phi},
              {"bessel_budget", pl.coeffs.bessel_budget},
              {"sum_lambda_phi_squared", lambda_phi_sq},
              {"remainder", pl.coeffs.remainder}}},
            {"residual", residual_json(pl.residual)},
            {"amplitude", {{"max_abs_u", umax}, {"bound", pl.field.amplitude_bound}, {"within_bound", bounded}}},
            {"hypotheses", hypotheses_json(pl.hypotheses)},
        };
        const std::string field_path = join(pl.cfg.output, "field.csv");
        const std::string diag_path = join(pl.cfg.output, "diagnostics.json");
        write_atomic(field_path, solver::field_csv(pl.field));
        write_atomic(diag_path, diag.dump(2) + "\n");
        out << "solved: N=" << pl.truncation.N << " epsilon=" << expr::format_double(pl.truncation.epsilon)
            << " residual_l2=" << expr::format_double(pl.residual.l2_interior) << '\n'
            << "wrote " << field_path << " and " << diag_path << '\n';
        return kExitOk;
    });
}

int cmd_eigs(const std::string& config_path, std::optional<std::size_t> modes, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = RunConfig::load(config_path);
        const spectral::ProblemSpec spec = cfg.problem();
        const auto grid = spectral::Grid::uniform(cfg.grid.ny, spec.s);
        const auto op = spectral::build_operator(spec, grid);
        const std::size_t requested = modes.value_or(cfg.modes);
        if (requested == 0) throw ConfigError("modes", "must be positive");
        const std::size_t count = reliable_count(requested, cfg.grid.ny, err);
        const auto sp = spectral::solve_eigs(op, count);
        for (std::size_t n : sp.near_degenerate) {
            err << "warning: lambda_" << n << " and lambda_" << n + 1 << " are nearly degenerate\n";
        }
        const std::string values_path = join(cfg.output, "spectrum.csv");
        const std::string functions_path = join(cfg.output, "eigenfunctions.csv");
        write_atomic(values_path, spectral::eigenvalues_csv(sp));
        write_atomic(functions_path, spectral::eigenfunctions_csv(sp, grid));
        out << spectral::eigenvalues_csv(sp);
        return kExitOk;
    });
}

int cmd_ks(double alpha, double m, double l, double z, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const specfn::KSParams params{alpha, m, l};
        const double v = specfn::kilbas_saigo(params, z);
        std::ostringstream s;
        // Values of order one (the usual case, including z = 0) print with ten decimals;
        // anything else in scientific notation with ten significant digits.
        const double mag = std::abs(v);
        if (v == 0.0 || (mag >= 0.1 && mag < 10.0)) {
            s << std::fixed << std::setprecision(10) << v;
        } else {
            s << std::scientific << std::setprecision(9) << v;
        }
        out << s.str() << '\n';
        return kExitOk;
    });
}

int cmd_verify(const std::string& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Pipeline pl = run_pipeline(config_path, err);
        std::vector<Check> checks;
        const double alpha = pl.spec.alpha;
        const double beta = pl.spec.beta;
        const std::size_t P = pl.grid.size();

        // grid convergence of the lowest eigenvalue: the y-discretization error the residual cannot see
        {
            const auto coarse_grid = spectral::Grid::uniform(std::max<std::size_t>(P / 2, 2), pl.spec.s);
            const auto coarse_op = spectral::build_operator(pl.spec, coarse_grid);
            const double coarse = spectral::solve_eigs(coarse_op, 1).lambda[0];
            checks.push_back({"residual: lowest eigenvalue change under grid halving (relative)",
                              std::abs(pl.spectrum.lambda[0] - coarse) / pl.spectrum.lambda[0], 1e-3});
        }
        // residual of the equation on the assembled field
        {
            const double area = std::sqrt(pl.cfg.grid.x_max);
            const double scale = std::max(pl.residual.scale, 1e-300);
            checks.push_back({"residual: L2 interior residual relative to the operator scale",
                              pl.residual.l2_interior / (scale * area), 5e-3});
            const double umax = std::max(max_abs_field(pl.field), 1e-300);
            for (std::size_t j = 0; j < pl.residual.boundary_defect.size(); ++j) {
                checks.push_back({"residual: boundary derivative of order " + std::to_string(j) + " (relative to max|u|)",
                                  pl.residual.boundary_defect[j] / umax, 1e-3});
            }
            checks.push_back({"residual: initial defect within the truncation bound", pl.residual.initial_defect,
                              pl.truncation.epsilon + 1e-9});
        }
        // mode dynamics: the two independent solutions of the mode equation
        {
            double worst = 0.0;
            // the lowest modes inside the range where the L1 scheme is validated (lambda x^(alpha+beta) <= 50),
            // and the lowest mode in any case
            const double reach = std::pow(pl.cfg.grid.x_max, alpha + beta);
            for (std::size_t n = 0; n < std::min<std::size_t>(3, pl.spectrum.count()); ++n) {
                if (n > 0 && pl.spectrum.lambda[n] * reach > 50.0) break;
                worst = std::max(worst, mode_cross_check(pl.spectrum.lambda[n], alpha, beta, pl.cfg.grid.x_max, 4096));
            }
            checks.push_back({"mode dynamics: L1 scheme vs Kilbas-Saigo closed form (lowest modes, M=4096)", worst, 1e-3});
        }
        // spectrum structure
        checks.push_back({"weighted orthonormality of eigenfunctions", weighted_orthonormality_defect(pl.spectrum, pl.op), 1e-8});
        {
            const std::size_t k = std::min<std::size_t>(5, pl.spectrum.count());
            const auto ny = spectral::nystrom_eigs(pl.kernel, pl.op, pl.grid, k);
            double worst = 0.0;
            for (std::size_t n = 0; n < k; ++n) {
                worst = std::max(worst, std::abs(ny.lambda[n] - pl.spectrum.lambda[n]) / pl.spectrum.lambda[n]);
            }
            checks.push_back({"Nystrom kernel eigenvalues vs finite-difference eigenvalues (relative)", worst, 1e-3});
        }
        {
            const std::size_t all = spectral::max_reliable_modes(P);
            const auto full = all == pl.spectrum.count() ? pl.spectrum : spectral::solve_eigs(pl.op, all);
            const double dev = spectral::mercer_check(full, pl.kernel, pl.op, all);
            const double scale = pl.kernel.Gbar.cwiseAbs().maxCoeff();
            checks.push_back({"Mercer reconstruction of the symmetrized kernel (relative, all resolved modes)",
                              dev / scale, 1e-2});
            checks.push_back({"Bessel inequality for the kernel at every node and every N",
                              spectral::bessel_kernel_violation(full, pl.kernel, pl.op), 0.0});
        }
        {
            double partial = 0.0;
            double worst = -std::numeric_limits<double>::infinity();
            for (double c : pl.coeffs.lambda_phi) {
                partial += c * c;
                worst = std::max(worst, partial - pl.coeffs.bessel_budget * (1.0 + 1e-12));
            }
            checks.push_back({"Bessel inequality for the coefficients of K*l(phi) at every N", worst, 0.0});
        }
        // truncation bound dominates the computed tail
        {
            const std::size_t Nmax = pl.spectrum.count();
            double tail_max = 0.0;
            if (pl.truncation.N < Nmax) {
                const auto full = solver::assemble(pl.spec, pl.spectrum, pl.coeffs, pl.xgrid, pl.grid, Nmax);
                tail_max = (full.u - pl.field.u).cwiseAbs().maxCoeff();
            }
            checks.push_back({"truncation bound dominates the computed series tail (bound - tail)",
                              pl.truncation.epsilon - tail_max, 0.0, false});
        }
        // amplitude bound, Kilbas-Saigo boundedness, zero data, determinism
        checks.push_back({"amplitude: max|u| - sum |phi_n| max|Y_n|",
                          max_abs_field(pl.field) - pl.field.amplitude_bound * (1.0 + 1e-12), 0.0});
        if (pl.truncation.N > 0) {
            const double t_max = pl.spectrum.lambda[pl.truncation.N - 1] * std::pow(pl.cfg.grid.x_max, alpha + beta);
            const specfn::KSEvaluator ks(specfn::KSParams::from_mode_equation(alpha, beta), t_max);
            checks.push_back({"Kilbas-Saigo values in (0,1] and nonincreasing (largest violation)",
                              ks_boundedness_violation(ks), 1e-6});
        }
        {
            spectral::ProblemSpec zero = pl.spec;
            zero.phi = expr::Expr::constant(0.0, "y");
            const auto zc = solver::fourier_coeffs(zero, pl.spectrum, pl.op, pl.grid);
            const auto zf = solver::assemble(zero, pl.spectrum, zc, pl.xgrid, pl.grid, pl.spectrum.count());
            checks.push_back({"uniqueness: zero initial data gives the zero field", max_abs_field(zf), 0.0});
            const auto again = solver::assemble(pl.spec, pl.spectrum, pl.coeffs, pl.xgrid, pl.grid, pl.truncation.N);
            checks.push_back({"determinism: repeated assembly differs by", (again.u - pl.field.u).cwiseAbs().maxCoeff(), 0.0});
        }

        json report = {{"config", config_path}, {"checks", checks_json(checks)}, {"hypotheses", hypotheses_json(pl.hypotheses)}};
        bool all = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed(); });
        report["pass"] = all;
        const std::string path = join(pl.cfg.output, "verification.json");
        write_atomic(path, report.dump(2) + "\n");
        return report_checks(checks, out, err);
    });
}

int cmd_selftest(std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        std::vector<Check> checks;
        const double pi = std::numbers::pi;

        // gamma ratios
        {
            double worst = 0.0;
            worst = std::max(worst, std::abs(specfn::gamma_ratio(1.0, 2.0) - 1.0));
            worst = std::max(worst, std::abs(specfn::gamma_ratio(0.5, 1.5) / 2.0 - 1.0));
            worst = std::max(worst, std::abs(specfn::gamma_ratio(200.0, 201.0) / 0.005 - 1.0));
            checks.push_back({"gamma ratio identities (relative)", worst, 1e-12});
        }
        // Kilbas-Saigo identities
        {
            double exp_err = 0.0;
            double ml_err = 0.0;
            for (int k = 0; k <= 200; ++k) {
                const double z = -20.0 + 0.1 * k;
                exp_err = std::max(exp_err, std::abs(specfn::kilbas_saigo({1.0, 2.0, 1.0}, z) - std::exp(z / 2.0)));
                for (double a : {0.3, 0.5, 0.9}) {
                    ml_err = std::max(ml_err, std::abs(specfn::kilbas_saigo({a, 1.0, 0.0}, z) - specfn::mittag_leffler(a, z)));
                }
            }
            checks.push_back({"E_{1,2,1}(z) = exp(z/2) on [-20,0]", exp_err, 1e-10});
            checks.push_back({"E_{alpha,1,0}(z) = E_alpha(z) on [-20,0]", ml_err, 1e-10});
            checks.push_back({"E_{1/2}(-1) = e erfc(1)",
                              std::abs(specfn::mittag_leffler(0.5, -1.0) - std::exp(1.0) * std::erfc(1.0)), 1e-8});
        }
        // mode dynamics
        {
            double worst = 0.0;
            for (double lambda : {1.0, pi * pi, 50.0}) {
                for (double beta : {0.0, 0.5}) worst = std::max(worst, mode_cross_check(lambda, 0.5, beta, 1.0, 4096));
            }
            checks.push_back({"L1 scheme vs closed form, alpha=0.5 (M=4096)", worst, 1e-3});
        }
        // spectra
        {
            spectral::ProblemSpec sine;
            const auto grid = spectral::Grid::uniform(2000, 1);
            const auto op = spectral::build_operator(sine, grid);
            const auto sp = spectral::solve_eigs(op, 200);
            double lam = 0.0;
            double fun = 0.0;
            for (std::size_t n = 0; n < 10; ++n) {
                const double k = (static_cast<double>(n) + 1.0) * pi;
                lam = std::max(lam, std::abs(sp.lambda[n] / (k * k) - 1.0));
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    fun = std::max(fun, std::abs(sp.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) -
                                                 std::sqrt(2.0) * std::sin(k * grid.y(i))));
                }
            }
            checks.push_back({"sine benchmark eigenvalues (relative, n<=10)", lam, 1e-4});
            checks.push_back({"sine benchmark eigenfunctions (sup norm, n<=10)", fun, 1e-3});
            const auto kernel = spectral::green_kernel(op, grid);
            checks.push_back({"sine benchmark Mercer reconstruction (N=200)", spectral::mercer_check(sp, kernel, op, 200), 2e-3});
            const auto ny = spectral::nystrom_eigs(kernel, op, grid, 5);
            double agree = 0.0;
            for (std::size_t n = 0; n < 5; ++n) agree = std::max(agree, std::abs(ny.lambda[n] / sp.lambda[n] - 1.0));
            checks.push_back({"sine benchmark Nystrom agreement (n<=5)", agree, 1e-3});
        }
        {
            // clamped beam: lambda_1 = k^4 with cosh(k) cos(k) = 1, k in (4, 5)
            double lo = 4.0;
            double hi = 5.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                ((std::cosh(lo) * std::cos(lo) - 1.0) * (std::cosh(mid) * std::cos(mid) - 1.0) <= 0.0 ? hi : lo) = mid;
            }
            const double k = 0.5 * (lo + hi);
            spectral::ProblemSpec beam;
            beam.s = 2;
            beam.p = {expr::Expr::constant(0.0, "y"), expr::Expr::constant(0.0, "y")};
            const auto grid = spectral::Grid::uniform(2000, 2);
            const auto sp = spectral::solve_eigs(spectral::build_operator(beam, grid), 1);
            checks.push_back({"beam benchmark lowest eigenvalue (relative)", std::abs(sp.lambda[0] / std::pow(k, 4) - 1.0), 1e-3});
        }
        {
            spectral::ProblemSpec deg;
            deg.K = expr::Expr::parse("sqrt(y)", "y");
            deg.m = 0.5;
            const auto grid = spectral::Grid::uniform(1000, 1);
            const auto op = spectral::build_operator(deg, grid);
            const auto sp = spectral::solve_eigs(op, 1);
            const auto ny = spectral::nystrom_eigs(spectral::green_kernel(op, grid), op, grid, 1);
            checks.push_back({"degenerate benchmark Nystrom agreement (K=sqrt(y))", std::abs(ny.lambda[0] / sp.lambda[0] - 1.0), 1e-2});
        }
        // end-to-end
        {
            spectral::ProblemSpec sine;
            sine.phi = expr::Expr::parse("sin(pi*y)", "y");
            const auto grid = spectral::Grid::uniform(1000, 1);
            const auto op = spectral::build_operator(sine, grid);
            const auto sp = spectral::solve_eigs(op, 20);
            const auto coeffs = solver::fourier_coeffs(sine, sp, op, grid);
            const auto rn = spectral::kernel_row_norms(spectral::green_kernel(op, grid), op);
            const auto tr = solver::select_truncation(coeffs, rn, 1e-8);
            const auto xgrid = fode::XGrid::graded(64, 1.0, 4.0);
            const auto field = solver::assemble(sine, sp, coeffs, xgrid, grid, tr.N);
            double worst = 0.0;
            for (std::size_t j = 0; j < xgrid.size(); ++j) {
                // E_{1/2}(-z) = exp(z^2) erfc(z)
                const double z = pi * pi * std::sqrt(xgrid[j]);
                const double e = std::exp(z * z) * std::erfc(z);
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    worst = std::max(worst, std::abs(field.u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) -
                                                     std::sin(pi * grid.y(i)) * e));
                }
            }
            checks.push_back({"end-to-end sine benchmark vs sin(pi y) E_{1/2}(-pi^2 sqrt(x))", worst, 1e-4});

            spectral::ProblemSpec zero = sine;
            zero.phi = expr::Expr::constant(0.0, "y");
            const auto zc = solver::fourier_coeffs(zero, sp, op, grid);
            const auto zf = solver::assemble(zero, sp, zc, xgrid, grid, sp.count());
            checks.push_back({"zero initial data gives the zero field", zf.u.cwiseAbs().maxCoeff(), 0.0});
            const auto x0 = fode::caputo_l1_solve(1.0, 0.5, 0.5, xgrid, 0.0);
            double l1_zero = 0.0;
            for (double v : x0.values) l1_zero = std::max(l1_zero, std::abs(v));
            checks.push_back({"L1 solve with zero initial value is zero", l1_zero, 0.0});
        }
        return report_checks(checks, out, err);
    });
}

} // namespace degfrac::cli
