#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "degfrac/fode.hpp"
#include "degfrac/solver.hpp"
#include "degfrac/spectral.hpp"
#include "oracles.hpp"

using namespace degfrac;
using namespace degfrac::solver;
using spectral::Grid;
using spectral::ProblemSpec;

namespace {

ProblemSpec sine_problem(const char* phi = "sin(pi*y)") {
    ProblemSpec p;
    p.phi = expr::Expr::parse(phi, "y");
    return p;
}

// Everything derived from one problem on one grid.
struct Setup {
    ProblemSpec spec;
    Grid grid;
    spectral::DiscreteOperator op;
    spectral::Spectrum spectrum;
    CoefficientSet coeffs;

    Setup(ProblemSpec p, std::size_t points, std::size_t modes)
        : spec(std::move(p)), grid(Grid::uniform(points, spec.s)), op(spectral::build_operator(spec, grid)),
          spectrum(spectral::solve_eigs(op, modes)), coeffs(fourier_coeffs(spec, spectrum, op, grid)) {}
};

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("Fourier coefficients of the sine benchmark") {
    const Setup s(sine_problem(), 2000, 10);
    REQUIRE(s.coeffs.count() == 10);
    CHECK(std::abs(std::abs(s.coeffs.phi[0]) - 1.0 / std::sqrt(2.0)) <= 1e-6);
    for (std::size_t n = 1; n < 10; ++n) CHECK(std::abs(s.coeffs.phi[n]) <= 1e-10);
    CHECK(s.coeffs.lambda_phi[0] == doctest::Approx(s.spectrum.lambda[0] * s.coeffs.phi[0]));
}

TEST_CASE("zero initial data has zero coefficients") {
    const Setup s(sine_problem("0"), 300, 10);
    for (double c : s.coeffs.phi) CHECK(c == 0.0);
    for (double c : s.coeffs.lambda_phi) CHECK(c == 0.0);
    CHECK(s.coeffs.bessel_budget == 0.0);
}

TEST_CASE("an eigenfunction as initial data excites only its own mode") {
    // sqrt(2) sin(3 pi y) is the normalized third mode of the classical problem
    const Setup s(sine_problem("sqrt(2)*sin(3*pi*y)"), 1000, 8);
    const double sign = s.spectrum.Y(500, 2) * std::sqrt(2.0) * std::sin(3.0 * std::numbers::pi * s.grid.y(500)) > 0 ? 1.0 : -1.0;
    CHECK(sign * s.coeffs.phi[2] == doctest::Approx(1.0).epsilon(1e-10));
    for (std::size_t n = 0; n < 8; ++n) {
        if (n != 2) CHECK(std::abs(s.coeffs.phi[n]) <= 1e-8);
    }

    const fode::XGrid xg = fode::XGrid::graded(32, 1.0, 4.0);
    const Field f = assemble(s.spec, s.spectrum, s.coeffs, xg, s.grid, 8);
    double worst = 0.0;
    for (std::size_t j = 0; j < xg.size(); ++j) {
        const double X = fode::ks_solution(s.coeffs.phi[2], s.spectrum.lambda[2], 0.5, 0.0, xg[j]);
        for (std::size_t i = 0; i < s.grid.size(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            worst = std::max(worst, std::abs(f.u(static_cast<Eigen::Index>(j), ii) - X * s.spectrum.Y(ii, 2)));
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("hypothesis checks") {
    const auto sine = check_hypotheses(sine_problem(), Grid::uniform(500, 1));
    CHECK(sine.all_passed());
    CHECK(sine.checks.size() == 3);

    const auto one = check_hypotheses(sine_problem("1"), Grid::uniform(500, 1));
    CHECK_FALSE(one.all_passed());
    REQUIRE_FALSE(one.checks.empty());
    CHECK_FALSE(one.checks[0].passed);
    CHECK(one.checks[0].magnitude == doctest::Approx(1.0));
    CHECK(one.checks[0].detail.find("y=0: 1") != std::string::npos);

    ProblemSpec beam;
    beam.s = 2;
    beam.p = {expr::Expr::constant(0.0, "y"), expr::Expr::constant(0.0, "y")};
    beam.phi = expr::Expr::parse("y*(1-y)", "y");
    const auto rep = check_hypotheses(beam, Grid::uniform(500, 2));
    CHECK_FALSE(rep.all_passed());
    const auto slope = std::find_if(rep.checks.begin(), rep.checks.end(), [](const HypothesisCheck& c) {
        return c.name.find("initial data") != std::string::npos && c.name.find("j=1") != std::string::npos;
    });
    REQUIRE(slope != rep.checks.end());
    CHECK_FALSE(slope->passed);
    CHECK(slope->magnitude == doctest::Approx(1.0).epsilon(1e-6));

    // a failing check is a warning, never an exception
    CHECK_NOTHROW(check_hypotheses(sine_problem("1/(y-0.5)"), Grid::uniform(64, 1)));
}

TEST_CASE("truncation bound") {
    const Setup sine(sine_problem(), 2000, 20);
    const auto kernel = spectral::green_kernel(sine.op, sine.grid);
    const auto norms = spectral::kernel_row_norms(kernel, sine.op);
    CHECK(truncation_bound(sine.coeffs, norms, 1) <= 1e-8);
    const Truncation t = select_truncation(sine.coeffs, norms, 1e-6);
    CHECK(t.N == 1);
    CHECK_FALSE(t.capped);
    CHECK_THROWS(truncation_bound(sine.coeffs, norms, 21));
    CHECK_THROWS(select_truncation(sine.coeffs, norms, 0.0));

    // rough data: the bound is nonincreasing and dominates the computed tail
    const Setup rough(sine_problem("y^2*(1-y)^2"), 400, 40);
    const auto rk = spectral::green_kernel(rough.op, rough.grid);
    const auto rn = spectral::kernel_row_norms(rk, rough.op);
    const fode::XGrid xg = fode::XGrid::graded(16, 1.0, 4.0);
    const Field full = assemble(rough.spec, rough.spectrum, rough.coeffs, xg, rough.grid, 40);
    double prev = truncation_bound(rough.coeffs, rn, 0);
    for (std::size_t N = 0; N <= 40; ++N) {
        const double eps = truncation_bound(rough.coeffs, rn, N);
        CHECK(eps <= prev);
        prev = eps;
        const Field part = assemble(rough.spec, rough.spectrum, rough.coeffs, xg, rough.grid, N);
        INFO("N = " << N);
        CHECK(eps >= max_abs(full.u - part.u));
    }
    const Truncation capped = select_truncation(rough.coeffs, rn, 1e-300);
    CHECK(capped.capped);
    CHECK(capped.N == 40);
}

TEST_CASE("assembled sine benchmark against the closed form") {
    const Setup s(sine_problem(), 1999, 1); // y = 0.5 is node 999
    const fode::XGrid xg = fode::XGrid::from_nodes({0.0, 0.1, 0.25, 0.5, 1.0});
    const Field f = assemble(s.spec, s.spectrum, s.coeffs, xg, s.grid, 1);
    REQUIRE(s.grid.y(999) == doctest::Approx(0.5).epsilon(1e-15));
    const double pi2 = std::numbers::pi * std::numbers::pi;
    CHECK(std::abs(f.u(2, 999) - oracle::erfcx(pi2 * 0.5)) <= 1e-4);
    CHECK(f.u(2, 999) == doctest::Approx(0.1121).epsilon(1e-3));
    for (std::size_t i = 0; i < s.grid.size(); i += 7) {
        const auto ii = static_cast<Eigen::Index>(i);
        CHECK(std::abs(f.u(0, ii) - std::sin(std::numbers::pi * s.grid.y(i))) <= 1e-6);
    }
    CHECK(f.amplitude_bound >= max_abs(f.u));
    CHECK(f.N == 1);
}

TEST_CASE("zero initial data assembles to the zero field") {
    const Setup s(sine_problem("0"), 300, 20);
    const fode::XGrid xg = fode::XGrid::graded(40, 2.0, 4.0);
    const Field f = assemble(s.spec, s.spectrum, s.coeffs, xg, s.grid, 20);
    for (Eigen::Index j = 0; j < f.u.rows(); ++j) {
        for (Eigen::Index i = 0; i < f.u.cols(); ++i) CHECK(f.u(j, i) == 0.0);
    }
    const auto r = residual(f, s.spec, s.op, xg, s.grid);
    CHECK(r.max_interior == 0.0);
    CHECK(r.l2_interior == 0.0);
    CHECK(r.initial_defect == 0.0);
    for (double d : r.boundary_defect) CHECK(d == 0.0);
    CHECK(direct_solve(s.spec, s.op, xg, s.grid).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assembly is deterministic") {
    ProblemSpec p;
    p.alpha = 0.4;
    p.beta = 0.5;
    p.K = expr::Expr::parse("1+y", "y");
    p.phi = expr::Expr::parse("y*(1-y)*exp(y)", "y");
    const Setup a(p, 300, 30);
    const Setup b(p, 300, 30);
    const fode::XGrid xg = fode::XGrid::graded(32, 1.0, 5.0);
    const Field fa = assemble(a.spec, a.spectrum, a.coeffs, xg, a.grid, 30);
    const Field fb = assemble(b.spec, b.spectrum, b.coeffs, xg, b.grid, 30);
    CHECK((fa.u - fb.u).cwiseAbs().maxCoeff() == 0.0);
    CHECK(field_csv(fa) == field_csv(fb));
}

TEST_CASE("sine benchmark residual") {
    // the x^(1/2) layer at x = 0 dominates the pointwise residual at the first two
    // nodes; the L2 norm over the interior measures the scheme error
    const Setup s(sine_problem(), 2000, 1);
    const fode::XGrid xg = fode::XGrid::graded(2048, 1.0, 4.0);
    const Field f = assemble(s.spec, s.spectrum, s.coeffs, xg, s.grid, 1);
    const auto r = residual(f, s.spec, s.op, xg, s.grid);
    CHECK(r.scale == doctest::Approx(std::abs(s.coeffs.lambda_phi[0]) * std::sqrt(2.0)).epsilon(1e-3));
    CHECK(r.l2_interior <= 5e-3 * r.scale);
    CHECK(r.initial_defect <= 1e-6);
    REQUIRE(r.boundary_defect.size() == 1);
    CHECK(r.boundary_defect[0] <= 1e-3);
}

TEST_CASE("residual decreases under simultaneous refinement") {
    double previous = 0.0;
    for (std::size_t level = 0; level < 3; ++level) {
        const std::size_t P = 250u << level;
        const std::size_t M = 256u << level;
        const Setup s(sine_problem(), P, 1);
        const fode::XGrid xg = fode::XGrid::graded(M, 1.0, 4.0);
        const Field f = assemble(s.spec, s.spectrum, s.coeffs, xg, s.grid, 1);
        const double l2 = residual(f, s.spec, s.op, xg, s.grid).l2_interior;
        INFO("P = " << P << ", M = " << M);
        if (level > 0) CHECK(previous / l2 >= 1.5);
        previous = l2;
    }
}

TEST_CASE("expansion of smooth compatible data converges") {
    const Setup s(sine_problem("y^3*(1-y)^3"), 2000, 100);
    CHECK(check_hypotheses(s.spec, s.grid).all_passed());
    const auto f = sample_phi(s.spec, s.grid);
    double worst_at_100 = 0.0;
    double worst_at_5 = 0.0;
    Eigen::VectorXd partial = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.grid.size()));
    for (std::size_t n = 0; n < 100; ++n) {
        partial += s.coeffs.phi[n] * s.spectrum.Y.col(static_cast<Eigen::Index>(n));
        if (n == 4) {
            for (std::size_t i = 0; i < f.size(); ++i) worst_at_5 = std::max(worst_at_5, std::abs(f[i] - partial[static_cast<Eigen::Index>(i)]));
        }
    }
    for (std::size_t i = 0; i < f.size(); ++i) worst_at_100 = std::max(worst_at_100, std::abs(f[i] - partial[static_cast<Eigen::Index>(i)]));
    CHECK(worst_at_100 <= 1e-4);
    CHECK(worst_at_100 < worst_at_5);
}

TEST_CASE("Bessel budget bounds every partial sum") {
    for (const char* phi : {"y^3*(1-y)^3", "y^2*(1-y)^2", "sin(pi*y)+0.3*sin(2*pi*y)^2"}) {
        const Setup s(sine_problem(phi), 500, 60);
        double partial = 0.0;
        for (std::size_t n = 0; n < s.coeffs.count(); ++n) {
            partial += s.coeffs.lambda_phi[n] * s.coeffs.lambda_phi[n];
            INFO(phi << ", N = " << n + 1);
            CHECK(partial <= s.coeffs.bessel_budget);
        }
        CHECK(s.coeffs.remainder >= 0.0);
        CHECK(partial + s.coeffs.remainder == doctest::Approx(s.coeffs.bessel_budget).epsilon(1e-8));
    }
}

TEST_CASE("solution stays within the amplitude bound") {
    ProblemSpec p;
    p.alpha = 0.7;
    p.beta = 1.0;
    p.K = expr::Expr::parse("sqrt(y)", "y");
    p.m = 0.5;
    p.phi = expr::Expr::parse("y^2*(1-y)", "y");
    const Setup s(p, 400, 40);
    const fode::XGrid xg = fode::XGrid::graded(64, 3.0, fode::default_grading(0.7));
    const Field f = assemble(s.spec, s.spectrum, s.coeffs, xg, s.grid, 40);
    CHECK(max_abs(f.u) <= f.amplitude_bound);
    // every mode decays, so no later row exceeds the initial row's extent by much
    CHECK(f.u.row(static_cast<Eigen::Index>(xg.size() - 1)).cwiseAbs().maxCoeff() <= f.u.row(0).cwiseAbs().maxCoeff());
}

TEST_CASE("direct time stepping agrees with the expansion") {
    ProblemSpec p = sine_problem("y^2*(1-y)^2");
    const Setup s(p, 200, 25);
    const fode::XGrid xg = fode::XGrid::graded(400, 1.0, 4.0);
    const Field f = assemble(s.spec, s.spectrum, s.coeffs, xg, s.grid, 25);
    const Eigen::MatrixXd U = direct_solve(s.spec, s.op, xg, s.grid);
    CHECK(max_abs(U - f.u) <= 5e-3);
    // the first row is the sampled initial data itself
    const auto phi = sample_phi(s.spec, s.grid);
    for (std::size_t i = 0; i < phi.size(); ++i) CHECK(U(0, static_cast<Eigen::Index>(i)) == phi[i]);
}

TEST_CASE("finite-difference weights") {
    const auto d1 = fd_weights(0.0, {-1.0, 0.0, 1.0}, 1);
    CHECK(d1[0] == doctest::Approx(-0.5));
    CHECK(d1[1] == doctest::Approx(0.0).scale(1.0));
    CHECK(d1[2] == doctest::Approx(0.5));
    const auto d2 = fd_weights(0.0, {-1.0, 0.0, 1.0}, 2);
    CHECK(d2[0] == doctest::Approx(1.0));
    CHECK(d2[1] == doctest::Approx(-2.0));
    CHECK(d2[2] == doctest::Approx(1.0));
    const auto d0 = fd_weights(0.5, {0.0, 1.0}, 0);
    CHECK(d0[0] == doctest::Approx(0.5));
    CHECK(d0[1] == doctest::Approx(0.5));
    CHECK_THROWS(fd_weights(0.0, {0.0, 1.0}, 2));

    // property: weights on n random nodes differentiate polynomials of degree < n exactly
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
        std::vector<double> nodes;
        double x = unit(rng);
        for (std::size_t k = 0; k < n; ++k) {
            nodes.push_back(x);
            x += 0.05 + unit(rng);
        }
        const double x0 = nodes.front() + unit(rng) * (nodes.back() - nodes.front());
        const int order = trial % static_cast<int>(n);
        const auto w = fd_weights(x0, nodes, order);
        for (int deg = 0; deg < static_cast<int>(n); ++deg) {
            double got = 0.0;
            double size = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                got += w[k] * std::pow(nodes[k] - x0, deg);
                size += std::abs(w[k] * std::pow(nodes[k] - x0, deg));
            }
            // d^order/dx^order of (x - x0)^deg at x0 is order! when deg == order, else 0
            const double expected = deg == order ? std::tgamma(order + 1.0) : 0.0;
            INFO("trial " << trial << " deg " << deg << " order " << order);
            CHECK(std::abs(got - expected) <= 1e-10 * std::max(1.0, size));
        }
    }
}

TEST_CASE("field CSV layout") {
    Field f;
    f.x = {0.0, 0.5};
    f.y = {0.25, 0.75};
    f.u = Eigen::MatrixXd(2, 2);
    f.u << 1.0, 0.1, -2.5, 1e-300;
    const std::string csv = field_csv(f);
    CHECK(csv == "x,y,u\n0,0.25,1\n0,0.75,0.1\n0.5,0.25,-2.5\n0.5,0.75,1e-300\n");
}

TEST_CASE("fourier_coeffs preconditions") {
    const Setup s(sine_problem(), 100, 5);
    spectral::Spectrum raw = s.spectrum;
    raw.normalized = false;
    CHECK_THROWS(fourier_coeffs(s.spec, raw, s.op, s.grid));
    const Grid other = Grid::uniform(101, 1);
    CHECK_THROWS(fourier_coeffs(s.spec, s.spectrum, s.op, other));
    CHECK_THROWS(assemble(s.spec, s.spectrum, s.coeffs, fode::XGrid::graded(8, 1.0, 1.0), s.grid, 6));
}
