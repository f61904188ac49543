#include "degfrac/fode.hpp"

#include <cmath>
#include <string>

#include "degfrac/specfn.hpp"

namespace degfrac::fode {

namespace {

void check_order(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("fractional order must lie in (0,1), got " + std::to_string(alpha));
    }
}

double inv_gamma_2ma(double alpha) { return std::exp(-specfn::log_gamma(2.0 - alpha)); }

} // namespace

XGrid::XGrid(std::vector<double> nodes, double grading) : nodes_(std::move(nodes)), grading_(grading) {}

XGrid XGrid::graded(std::size_t intervals, double x_max, double grading) {
    if (intervals == 0) throw InvalidGrid("x-grid needs at least one interval");
    if (!(x_max > 0.0) || !std::isfinite(x_max)) throw InvalidGrid("x_max must be positive and finite");
    if (!(grading >= 1.0) || !std::isfinite(grading)) throw InvalidGrid("grading exponent must be >= 1");
    std::vector<double> x(intervals + 1);
    const double m = static_cast<double>(intervals);
    for (std::size_t j = 0; j <= intervals; ++j) x[j] = x_max * std::pow(static_cast<double>(j) / m, grading);
    x.back() = x_max;
    for (std::size_t j = 1; j < x.size(); ++j) {
        if (!(x[j] > x[j - 1])) throw InvalidGrid("graded x-grid collapsed (zero step); reduce grading or intervals");
    }
    return XGrid(std::move(x), grading);
}

XGrid XGrid::from_nodes(std::vector<double> nodes) {
    if (nodes.size() < 2) throw InvalidGrid("x-grid needs at least two nodes");
    if (nodes.front() != 0.0) throw InvalidGrid("x-grid must start at 0");
    for (std::size_t j = 1; j < nodes.size(); ++j) {
        if (!(nodes[j] > nodes[j - 1]) || !std::isfinite(nodes[j])) {
            throw InvalidGrid("x-grid nodes must be finite and strictly increasing (zero step at node " +
                              std::to_string(j) + ")");
        }
    }
    return XGrid(std::move(nodes), 1.0);
}

void l1_kernel_differences(const XGrid& grid, std::size_t j, double alpha, std::vector<double>& out) {
    const double gamma = 1.0 - alpha;
    const double xj = grid[j];
    out.resize(j + 1);
    // out temporarily holds the powers (x_j - x_k)^gamma
    for (std::size_t k = 0; k < j; ++k) out[k] = std::pow(xj - grid[k], gamma);
    out[j] = 0.0;
    for (std::size_t k = 0; k + 1 < j; ++k) {
        const double b = xj - grid[k + 1];
        const double u = (grid[k + 1] - grid[k]) / b;
        if (u >= 1e-2) {
            out[k] -= out[k + 1];
        } else {
            // far from x_j the powers nearly cancel: b^g ((1 + u)^g - 1) by the binomial series
            double series = 1.0;
            for (int i = 8; i >= 1; --i) series = 1.0 + series * (gamma - i) * u / (i + 1);
            out[k] = out[k + 1] * gamma * u * series;
        }
    }
    out.resize(j);
}

double default_grading(double alpha) {
    check_order(alpha);
    return 2.0 / alpha;
}

double ks_solution(double phi_n, double lambda_n, double alpha, double beta, double x) {
    if (!(lambda_n > 0.0)) throw std::invalid_argument("eigenvalue must be positive");
    if (!(x >= 0.0)) throw std::invalid_argument("x must be nonnegative");
    if (x == 0.0) return phi_n;
    const auto params = specfn::KSParams::from_mode_equation(alpha, beta);
    return phi_n * specfn::kilbas_saigo(params, -lambda_n * std::pow(x, alpha + beta));
}

ModeAmplitude caputo_l1_solve(double lambda, double alpha, double beta, const XGrid& grid, double x0) {
    check_order(alpha);
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (!(beta > -alpha)) throw std::invalid_argument("beta must exceed -alpha");

    const std::size_t n = grid.size();
    const double scale = inv_gamma_2ma(alpha);

    ModeAmplitude out;
    out.lambda = lambda;
    out.phi = x0;
    out.values.assign(n, 0.0);
    out.values[0] = x0;

    std::vector<double> inv_step(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) inv_step[k] = 1.0 / (grid[k + 1] - grid[k]);
    std::vector<double> dx(n - 1, 0.0); // X_{k+1} - X_k
    std::vector<double> w;

    for (std::size_t j = 1; j < n; ++j) {
        l1_kernel_differences(grid, j, alpha, w);
        double history = 0.0;
        for (std::size_t k = 0; k + 1 < j; ++k) history += w[k] * inv_step[k] * dx[k];
        history *= scale;
        const double diag = w[j - 1] * inv_step[j - 1] * scale; // a_{j,j-1}
        const double reaction = lambda * std::pow(grid[j], beta);
        const double denom = diag + reaction;
        if (!(denom > 0.0)) throw std::logic_error("L1 step matrix lost positivity");
        const double xj = (diag * out.values[j - 1] - history) / denom;
        out.values[j] = xj;
        dx[j - 1] = xj - out.values[j - 1];
    }
    return out;
}

std::vector<double> caputo_derivative(std::span<const double> values, const XGrid& grid, double alpha) {
    return caputo_derivative_batch(values, 1, grid, alpha);
}

std::vector<double> caputo_derivative_batch(std::span<const double> profiles, std::size_t profile_count,
                                            const XGrid& grid, double alpha) {
    check_order(alpha);
    const std::size_t n = grid.size();
    if (n < 2) throw InvalidGrid("Caputo derivative needs at least two nodes");
    if (profiles.size() != profile_count * n) {
        throw std::invalid_argument("profile data does not match the grid size");
    }
    const std::size_t m = n - 1;
    const double scale = inv_gamma_2ma(alpha);

    std::vector<double> slopes(profile_count * m);
    for (std::size_t q = 0; q < profile_count; ++q) {
        const double* v = profiles.data() + q * n;
        for (std::size_t k = 0; k < m; ++k) slopes[q * m + k] = (v[k + 1] - v[k]) / (grid[k + 1] - grid[k]);
    }

    std::vector<double> result(profile_count * m, 0.0);
    std::vector<double> weight;
    for (std::size_t j = 1; j < n; ++j) {
        l1_kernel_differences(grid, j, alpha, weight);
        for (std::size_t q = 0; q < profile_count; ++q) {
            const double* s = slopes.data() + q * m;
            double acc = 0.0;
            for (std::size_t k = 0; k < j; ++k) acc += weight[k] * s[k];
            result[q * m + (j - 1)] = acc * scale;
        }
    }
    return result;
}

} // namespace degfrac::fode
