#include "degfrac/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <lapacke.h>

#include "degfrac/specfn.hpp"

namespace degfrac::solver {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double eval_phi(const spectral::ProblemSpec& spec, double y) {
    try {
        return spec.phi.eval(y);
    } catch (const expr::DomainError& err) {
        throw spectral::InvalidProblem("phi", "cannot be evaluated at y=" + expr::format_double(y) + " (" +
                                                  err.what() + ")");
    }
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double weighted_sum(const std::vector<double>& w, const std::vector<double>& v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += w[i] * std::abs(v[i]);
    return acc;
}

// Derivative of order j at an endpoint, from the `count` values nearest to it.
double endpoint_derivative(const std::vector<double>& nodes, const std::vector<double>& values, double at, int j,
                           std::size_t count, bool from_left, double* noise) {
    std::vector<double> xs;
    std::vector<double> vs;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t idx = from_left ? k : nodes.size() - 1 - k;
        xs.push_back(nodes[idx]);
        vs.push_back(values[idx]);
    }
    const std::vector<double> w = fd_weights(at, xs, j);
    double d = 0.0;
    for (std::size_t k = 0; k < count; ++k) d += w[k] * vs[k];
    if (noise != nullptr) *noise = 100.0 * kEps * weighted_sum(w, vs);
    return d;
}

std::string check_name(const char* what, int j) { return std::string(what) + " (j=" + std::to_string(j) + ")"; }

} // namespace

std::vector<double> fd_weights(double x0, const std::vector<double>& nodes, int order) {
    const std::size_t n = nodes.size();
    if (order < 0 || n <= static_cast<std::size_t>(order)) {
        throw std::invalid_argument("need more nodes than the derivative order");
    }
    const auto M = static_cast<std::size_t>(order);
    // c[k][m]: weight of node k for derivative m, built up one node at a time
    std::vector<std::vector<double>> c(n, std::vector<double>(M + 1, 0.0));
    double c1 = 1.0;
    double c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min(i, M);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - x0;
        for (std::size_t k = 0; k < i; ++k) {
            const double c3 = nodes[i] - nodes[k];
            c2 *= c3;
            if (k == i - 1) {
                for (std::size_t m = mn; m >= 1; --m) {
                    c[i][m] = c1 * (static_cast<double>(m) * c[i - 1][m - 1] - c5 * c[i - 1][m]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (std::size_t m = mn; m >= 1; --m) {
                c[k][m] = (c4 * c[k][m] - static_cast<double>(m) * c[k][m - 1]) / c3;
            }
            c[k][0] = c4 * c[k][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = c[k][M];
    return out;
}

std::vector<double> sample_phi(const spectral::ProblemSpec& spec, const spectral::Grid& grid) {
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) f[i] = eval_phi(spec, grid.y(i));
    return f;
}

CoefficientSet fourier_coeffs(const spectral::ProblemSpec& spec, const spectral::Spectrum& spectrum,
                              const spectral::DiscreteOperator& op, const spectral::Grid& grid) {
    if (!spectrum.normalized) throw std::invalid_argument("spectrum must be normalized");
    const std::size_t P = grid.size();
    if (op.size() != P || static_cast<std::size_t>(spectrum.Y.rows()) != P) {
        throw std::invalid_argument("spectrum, operator and grid sizes differ");
    }
    const std::vector<double> f = sample_phi(spec, grid);
    const Eigen::VectorXd fv = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(P));

    CoefficientSet out;
    for (std::size_t n = 0; n < spectrum.count(); ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < P; ++i) acc += op.W(i) * f[i] * spectrum.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n));
        out.phi.push_back(acc);
        out.lambda_phi.push_back(spectrum.lambda[n] * acc);
    }

    // g = K l(phi); its 1/K-weighted coefficients are exactly lambda_n phi_n
    const Eigen::VectorXd lphi = op.apply_l(fv);
    Eigen::VectorXd g(static_cast<Eigen::Index>(P));
    for (std::size_t i = 0; i < P; ++i) g[static_cast<Eigen::Index>(i)] = op.K()[i] * lphi[static_cast<Eigen::Index>(i)];
    Eigen::VectorXd r = g;
    for (std::size_t n = 0; n < spectrum.count(); ++n) r -= out.lambda_phi[n] * spectrum.Y.col(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < P; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out.bessel_budget += op.W(i) * g[k] * g[k];
        out.remainder += op.W(i) * r[k] * r[k];
    }
    return out;
}

bool HypothesisReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.passed; });
}

HypothesisReport check_hypotheses(const spectral::ProblemSpec& spec, const spectral::Grid& grid) {
    HypothesisReport report;
    const int s = spec.s;

    // (a) phi^(j)(0) = phi^(j)(1) = 0 for j < s, by one-sided differences on a fine local stencil
    {
        const double step = 1e-3;
        double phi_scale = 1.0;
        for (int k = 0; k <= 64; ++k) {
            try {
                phi_scale = std::max(phi_scale, std::abs(spec.phi.eval(k / 64.0)));
            } catch (const expr::DomainError&) {
            }
        }
        for (int j = 0; j < s; ++j) {
            HypothesisCheck check;
            check.name = check_name("initial data derivative vanishes at y=0 and y=1", j);
            const std::size_t count = static_cast<std::size_t>(j) + 5;
            try {
                std::vector<double> left_x, left_v, right_x, right_v;
                for (std::size_t k = 0; k < count; ++k) {
                    const double d = static_cast<double>(k) * step;
                    left_x.push_back(d);
                    left_v.push_back(spec.phi.eval(d));
                    right_x.push_back(1.0 - d);
                    right_v.push_back(spec.phi.eval(1.0 - d));
                }
                double noise_l = 0.0;
                double noise_r = 0.0;
                const double dl = endpoint_derivative(left_x, left_v, 0.0, j, count, true, &noise_l);
                const double dr = endpoint_derivative(right_x, right_v, 1.0, j, count, true, &noise_r);
                check.magnitude = std::max(std::abs(dl), std::abs(dr));
                check.threshold = 1e-6 * phi_scale + std::max(noise_l, noise_r);
                check.passed = check.magnitude <= check.threshold;
                check.detail = "y=0: " + expr::format_double(dl) + ", y=1: " + expr::format_double(dr);
            } catch (const expr::DomainError& err) {
                check.passed = false;
                check.magnitude = std::numeric_limits<double>::infinity();
                check.detail = std::string("phi not evaluable near an endpoint: ") + err.what();
            }
            report.checks.push_back(check);
        }
    }

    // (b) divided differences of phi up to order 2s stay bounded when the step halves
    {
        HypothesisCheck check;
        check.name = "divided differences of initial data up to order 2s bounded under refinement";
        check.threshold = 1.25;
        auto max_divided = [&](std::size_t cells, int k) {
            const double h = 1.0 / static_cast<double>(cells);
            std::vector<double> v(cells + 1);
            for (std::size_t i = 0; i <= cells; ++i) v[i] = spec.phi.eval(static_cast<double>(i) * h);
            for (int order = 0; order < k; ++order) {
                for (std::size_t i = 0; i + 1 < v.size(); ++i) v[i] = v[i + 1] - v[i];
                v.pop_back();
            }
            return max_abs(v) / std::pow(h, k);
        };
        try {
            double worst = 0.0;
            int worst_k = 0;
            for (int k = 1; k <= 2 * s; ++k) {
                const double coarse = max_divided(256, k);
                const double fine = max_divided(512, k);
                const double ratio = coarse > 1e-10 ? fine / coarse : 1.0;
                if (ratio > worst) {
                    worst = ratio;
                    worst_k = k;
                }
            }
            check.magnitude = worst;
            check.passed = worst <= check.threshold;
            check.detail = "largest growth at order " + std::to_string(worst_k);
        } catch (const expr::DomainError& err) {
            check.passed = false;
            check.magnitude = std::numeric_limits<double>::infinity();
            check.detail = std::string("phi not evaluable on [0,1]: ") + err.what();
        }
        report.checks.push_back(check);
    }

    // (c) (K l(phi))^(j) vanishes at both ends, j < s (the order of this condition is read as s)
    {
        try {
            const auto op = spectral::build_operator(spec, grid);
            const std::vector<double> f = sample_phi(spec, grid);
            const Eigen::VectorXd lphi =
                op.apply_l(Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())));
            std::vector<double> g(f.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = op.K()[i] * lphi[static_cast<Eigen::Index>(i)];
            const double g_scale = std::max(1.0, max_abs(g));
            for (int j = 0; j < s; ++j) {
                HypothesisCheck check;
                check.name = check_name("derivative of K*l(phi) vanishes at y=0 and y=1 (order read as s)", j);
                const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(j) + 3, g.size());
                const double dl = endpoint_derivative(grid.nodes(), g, 0.0, j, count, true, nullptr);
                const double dr = endpoint_derivative(grid.nodes(), g, 1.0, j, count, false, nullptr);
                check.magnitude = std::max(std::abs(dl), std::abs(dr));
                check.threshold = 1e-3 * g_scale;
                check.passed = check.magnitude <= check.threshold;
                check.detail = "y=0: " + expr::format_double(dl) + ", y=1: " + expr::format_double(dr);
                report.checks.push_back(check);
            }
        } catch (const std::exception& err) {
            HypothesisCheck check;
            check.name = "derivative of K*l(phi) vanishes at y=0 and y=1 (order read as s)";
            check.passed = false;
            check.magnitude = std::numeric_limits<double>::infinity();
            check.detail = err.what();
            report.checks.push_back(check);
        }
    }
    return report;
}

double truncation_bound(const CoefficientSet& coeffs, const std::vector<double>& kernel_row_norms, std::size_t N) {
    if (N > coeffs.count()) throw std::invalid_argument("truncation level exceeds the number of coefficients");
    double tail = coeffs.remainder;
    // add from the far end so the small terms accumulate first
    for (std::size_t n = coeffs.count(); n > N; --n) tail += coeffs.lambda_phi[n - 1] * coeffs.lambda_phi[n - 1];
    return std::sqrt(tail) * std::sqrt(max_abs(kernel_row_norms));
}

Truncation select_truncation(const CoefficientSet& coeffs, const std::vector<double>& kernel_row_norms,
                             double tolerance) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    Truncation out;
    for (std::size_t N = 0; N <= coeffs.count(); ++N) {
        const double eps = truncation_bound(coeffs, kernel_row_norms, N);
        out.N = N;
        out.epsilon = eps;
        if (eps <= tolerance) return out;
    }
    out.capped = true;
    return out;
}

Field assemble(const spectral::ProblemSpec& spec, const spectral::Spectrum& spectrum, const CoefficientSet& coeffs,
               const fode::XGrid& xgrid, const spectral::Grid& grid, std::size_t N) {
    if (N > spectrum.count() || N > coeffs.count()) throw std::invalid_argument("N exceeds the available modes");
    const std::size_t P = grid.size();
    const std::size_t nx = xgrid.size();
    Field field;
    field.x.assign(xgrid.nodes().begin(), xgrid.nodes().end());
    field.y = grid.nodes();
    field.N = N;
    field.u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(P));
    if (N == 0) return field;

    const double g = spec.alpha + spec.beta;
    const double t_max = spectrum.lambda[N - 1] * std::pow(xgrid.x_max(), g);
    const specfn::KSEvaluator ks(specfn::KSParams::from_mode_equation(spec.alpha, spec.beta), t_max);

    std::vector<double> xpow(nx);
    for (std::size_t j = 0; j < nx; ++j) xpow[j] = std::pow(xgrid[j], g);
    for (std::size_t n = 0; n < N; ++n) {
        field.amplitude_bound += std::abs(coeffs.phi[n]) * spectrum.Y.col(static_cast<Eigen::Index>(n)).cwiseAbs().maxCoeff();
    }

    Eigen::VectorXd X(static_cast<Eigen::Index>(N));
    for (std::size_t j = 0; j < nx; ++j) {
        for (std::size_t n = 0; n < N; ++n) {
            const double t = std::min(spectrum.lambda[n] * xpow[j], t_max);
            X[static_cast<Eigen::Index>(n)] = coeffs.phi[n] == 0.0 ? 0.0 : coeffs.phi[n] * ks(t);
        }
        auto row = field.u.row(static_cast<Eigen::Index>(j));
        // ascending n at every point, independent of any vectorization of the outer loop
        for (std::size_t i = 0; i < P; ++i) {
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                acc += X[static_cast<Eigen::Index>(n)] * spectrum.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n));
            }
            row[static_cast<Eigen::Index>(i)] = acc;
        }
    }
    return field;
}

ResidualReport residual(const Field& field, const spectral::ProblemSpec& spec, const spectral::DiscreteOperator& op,
                        const fode::XGrid& xgrid, const spectral::Grid& grid) {
    const std::size_t P = grid.size();
    const std::size_t nx = xgrid.size();
    if (static_cast<std::size_t>(field.u.rows()) != nx || static_cast<std::size_t>(field.u.cols()) != P ||
        op.size() != P) {
        throw std::invalid_argument("field does not match the grids");
    }
    ResidualReport rep;

    std::vector<double> profiles(P * nx);
    for (std::size_t i = 0; i < P; ++i) {
        for (std::size_t j = 0; j < nx; ++j) {
            profiles[i * nx + j] = field.u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        }
    }
    const std::vector<double> caputo = fode::caputo_derivative_batch(profiles, P, xgrid, spec.alpha);
    const std::size_t M = nx - 1;

    const Eigen::VectorXd l0 = op.apply_l(field.u.row(0).transpose());
    for (std::size_t i = 0; i < P; ++i) rep.scale = std::max(rep.scale, std::abs(op.K()[i] * l0[static_cast<Eigen::Index>(i)]));

    double l2 = 0.0;
    for (std::size_t j = 1; j < nx; ++j) {
        const Eigen::VectorXd lu = op.apply_l(field.u.row(static_cast<Eigen::Index>(j)).transpose());
        const double xb = std::pow(xgrid[j], spec.beta);
        const double dx = xgrid[j] - xgrid[j - 1];
        for (std::size_t i = 0; i < P; ++i) {
            const double r = caputo[i * M + (j - 1)] + xb * op.K()[i] * lu[static_cast<Eigen::Index>(i)];
            rep.max_interior = std::max(rep.max_interior, std::abs(r));
            l2 += dx * grid.w(i) * r * r;
        }
    }
    rep.l2_interior = std::sqrt(l2);

    for (int j = 0; j < spec.s; ++j) {
        double worst = 0.0;
        const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(j) + 3, P);
        std::vector<double> row(P);
        for (std::size_t jx = 0; jx < nx; ++jx) {
            for (std::size_t i = 0; i < P; ++i) row[i] = field.u(static_cast<Eigen::Index>(jx), static_cast<Eigen::Index>(i));
            const double dl = endpoint_derivative(grid.nodes(), row, 0.0, j, count, true, nullptr);
            const double dr = endpoint_derivative(grid.nodes(), row, 1.0, j, count, false, nullptr);
            worst = std::max({worst, std::abs(dl), std::abs(dr)});
        }
        rep.boundary_defect.push_back(worst);
    }

    const std::vector<double> f = sample_phi(spec, grid);
    for (std::size_t i = 0; i < P; ++i) rep.initial_defect = std::max(rep.initial_defect, std::abs(field.u(0, static_cast<Eigen::Index>(i)) - f[i]));
    return rep;
}

Eigen::MatrixXd direct_solve(const spectral::ProblemSpec& spec, const spectral::DiscreteOperator& op,
                             const fode::XGrid& xgrid, const spectral::Grid& grid) {
    const std::size_t P = grid.size();
    const std::size_t nx = xgrid.size();
    if (op.size() != P) throw std::invalid_argument("operator does not match the grid");
    const double alpha = spec.alpha;
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    const double inv_gamma = std::exp(-specfn::log_gamma(2.0 - alpha));
    std::vector<double> kernel;
    const int kd = op.bandwidth();
    const auto ld = static_cast<std::size_t>(kd) + 1;
    const auto n = static_cast<lapack_int>(P);

    Eigen::MatrixXd U(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(P));
    const std::vector<double> f = sample_phi(spec, grid);
    for (std::size_t i = 0; i < P; ++i) U(0, static_cast<Eigen::Index>(i)) = f[i];

    Eigen::MatrixXd dU(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(nx)); // column k: U_{k+1} - U_k
    std::vector<double> band(ld * P);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(P));
    Eigen::VectorXd hist(static_cast<Eigen::Index>(P));
    for (std::size_t j = 1; j < nx; ++j) {
        const double xj = xgrid[j];
        hist.setZero();
        fode::l1_kernel_differences(xgrid, j, alpha, kernel);
        for (std::size_t k = 0; k + 1 < j; ++k) {
            const double a = kernel[k] * inv_gamma / (xgrid[k + 1] - xgrid[k]);
            hist += a * dU.col(static_cast<Eigen::Index>(k));
        }
        const double diag = kernel[j - 1] * inv_gamma / (xj - xgrid[j - 1]);
        const double xb = std::pow(xj, spec.beta);
        for (std::size_t c = 0; c < P; ++c) {
            for (std::size_t d = 0; d < ld; ++d) {
                double v = c + d < P ? xb * op.band(c, static_cast<int>(d)) : 0.0;
                if (d == 0) v += diag * op.W(c);
                band[d + c * ld] = v;
            }
            const auto ci = static_cast<Eigen::Index>(c);
            rhs[ci] = op.W(c) * (diag * U(static_cast<Eigen::Index>(j - 1), ci) - hist[ci]);
        }
        lapack_int info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', n, kd, band.data(), static_cast<lapack_int>(ld));
        if (info != 0) throw spectral::EigenFailure("time-step matrix is not positive definite");
        info = LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'L', n, kd, 1, band.data(), static_cast<lapack_int>(ld), rhs.data(), n);
        if (info != 0) throw spectral::EigenFailure("time-step solve failed");
        U.row(static_cast<Eigen::Index>(j)) = rhs.transpose();
        dU.col(static_cast<Eigen::Index>(j - 1)) =
            (U.row(static_cast<Eigen::Index>(j)) - U.row(static_cast<Eigen::Index>(j - 1))).transpose();
    }
    return U;
}

std::string field_csv(const Field& field) {
    std::ostringstream out;
    out << "x,y,u\n";
    for (std::size_t j = 0; j < field.x.size(); ++j) {
        const std::string xs = expr::format_double(field.x[j]);
        for (std::size_t i = 0; i < field.y.size(); ++i) {
            out << xs << ',' << expr::format_double(field.y[i]) << ','
                << expr::format_double(field.u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))) << '\n';
        }
    }
    return out.str();
}

} // namespace degfrac::solver
