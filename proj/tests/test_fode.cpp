#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "degfrac/fode.hpp"
#include "degfrac/specfn.hpp"
#include "oracles.hpp"

using namespace degfrac::fode;

TEST_CASE("graded grids") {
    const XGrid g = XGrid::graded(8, 2.0, 2.0);
    REQUIRE(g.size() == 9);
    CHECK(g.intervals() == 8);
    CHECK(g[0] == 0.0);
    CHECK(g[4] == doctest::Approx(0.5));
    CHECK(g.x_max() == 2.0);
    for (std::size_t j = 1; j < g.size(); ++j) CHECK(g[j] > g[j - 1]);
    CHECK(default_grading(0.5) == 4.0);

    CHECK_THROWS_AS(XGrid::graded(0, 1.0, 2.0), InvalidGrid);
    CHECK_THROWS_AS(XGrid::graded(8, -1.0, 2.0), InvalidGrid);
    CHECK_THROWS_AS(XGrid::graded(8, 1.0, 0.5), InvalidGrid);
    CHECK_THROWS_AS(XGrid::from_nodes({0.0, 0.5, 0.5, 1.0}), InvalidGrid);
    CHECK_THROWS_AS(XGrid::from_nodes({0.1, 0.5}), InvalidGrid);
    CHECK_NOTHROW(XGrid::from_nodes({0.0, 0.1, 1.0}));
}

TEST_CASE("closed-form mode solution examples") {
    CHECK(ks_solution(1.0, std::numbers::pi * std::numbers::pi, 0.5, 0.0, 0.0) == 1.0);
    CHECK(ks_solution(1.0, 1.0, 0.5, 0.0, 1.0) == doctest::Approx(oracle::erfcx(1.0)).epsilon(1e-12));
    const double pi2 = std::numbers::pi * std::numbers::pi;
    CHECK(ks_solution(0.7071068, pi2, 0.5, 0.0, 1.0) == doctest::Approx(0.7071068 * oracle::erfcx(pi2)).epsilon(1e-12));
    CHECK(ks_solution(0.7071068, pi2, 0.5, 0.0, 1.0) == doctest::Approx(0.04022).epsilon(1e-3));
}

TEST_CASE("L1 solve examples") {
    const XGrid g = XGrid::graded(4096, 1.0, 2.0);
    CHECK(std::abs(caputo_l1_solve(1.0, 0.5, 0.0, g, 1.0).values.back() - oracle::erfcx(1.0)) <= 1e-3);
    CHECK(std::abs(caputo_l1_solve(1.0, 0.5, 0.5, g, 1.0).values.back() - ks_solution(1.0, 1.0, 0.5, 0.5, 1.0)) <= 1e-3);

    const auto zero = caputo_l1_solve(3.0, 0.4, 0.2, XGrid::graded(256, 1.0, 5.0), 0.0);
    for (double v : zero.values) CHECK(v == 0.0);

    CHECK_THROWS(caputo_l1_solve(0.0, 0.5, 0.0, g, 1.0));
    CHECK_THROWS(caputo_l1_solve(1.0, 1.5, 0.0, g, 1.0));
    CHECK_THROWS(caputo_l1_solve(1.0, 0.5, -0.6, g, 1.0));
}

TEST_CASE("L1 solve agrees with the closed form on a subset of the parameter matrix") {
    // the full 36-point matrix runs in the acceptance suite
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (double lambda : {1.0, pi2, 50.0}) {
        const double alpha = 0.5;
        const XGrid g = XGrid::graded(4096, 1.0, default_grading(alpha));
        const auto l1 = caputo_l1_solve(lambda, alpha, 0.0, g, 1.0);
        double worst = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            worst = std::max(worst, std::abs(l1.values[j] - oracle::erfcx(lambda * std::sqrt(g[j]))));
        }
        INFO("lambda " << lambda);
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("L1 solutions are positive and nonincreasing") {
    for (double alpha : {0.3, 0.5, 0.9}) {
        for (double beta : {-0.5 * alpha, 0.0, 1.0}) {
            for (double lambda : {0.5, 20.0, 1e4}) {
                const XGrid g = XGrid::graded(512, 1.0, default_grading(alpha));
                const auto sol = caputo_l1_solve(lambda, alpha, beta, g, 2.0);
                INFO("alpha " << alpha << " beta " << beta << " lambda " << lambda);
                for (std::size_t j = 1; j < sol.values.size(); ++j) {
                    CHECK(sol.values[j] > 0.0);
                    CHECK(sol.values[j] <= sol.values[j - 1]);
                }
            }
        }
    }
}

TEST_CASE("L1 solve is linear in the initial value") {
    const XGrid g = XGrid::graded(300, 1.5, 3.0);
    const auto one = caputo_l1_solve(7.0, 0.6, 0.3, g, 1.25);
    const auto two = caputo_l1_solve(7.0, 0.6, 0.3, g, 2.5);
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(two.values[j] == 2.0 * one.values[j]);
}

TEST_CASE("L1 solution satisfies its own discrete equation") {
    const double alpha = 0.4;
    const double beta = 0.5;
    const double lambda = 5.0;
    const XGrid g = XGrid::graded(400, 1.0, default_grading(alpha));
    const auto sol = caputo_l1_solve(lambda, alpha, beta, g, 1.0);
    const auto d = caputo_derivative(sol.values, g, alpha);
    REQUIRE(d.size() == g.size() - 1);
    for (std::size_t j = 1; j < g.size(); ++j) {
        CHECK(std::abs(d[j - 1] + lambda * std::pow(g[j], beta) * sol.values[j]) <= 1e-10);
    }
}

TEST_CASE("Caputo derivative examples") {
    const XGrid g = XGrid::graded(2048, 1.0, 1.0);
    std::vector<double> constant(g.size(), 3.0), linear(g.size()), square(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        linear[j] = g[j];
        square[j] = g[j] * g[j];
    }
    for (double v : caputo_derivative(constant, g, 0.5)) CHECK(v == 0.0);
    // D^alpha x = x^(1-alpha)/Gamma(2-alpha), D^alpha x^2 = 2 x^(2-alpha)/Gamma(3-alpha)
    CHECK(std::abs(caputo_derivative(linear, g, 0.5).back() - 2.0 / std::sqrt(std::numbers::pi)) <= 1e-3);
    CHECK(std::abs(caputo_derivative(square, g, 0.5).back() - 8.0 / (3.0 * std::sqrt(std::numbers::pi))) <= 1e-2);
    // the L1 rule is exact for piecewise-linear data
    const auto d = caputo_derivative(linear, g, 0.3);
    for (std::size_t j = 1; j < g.size(); j += 97) {
        CHECK(d[j - 1] == doctest::Approx(std::pow(g[j], 0.7) * oracle::rgamma(1.7)).epsilon(1e-10));
    }
}

TEST_CASE("batched Caputo derivative matches profile by profile") {
    const XGrid g = XGrid::graded(64, 1.0, 3.0);
    std::vector<double> profiles;
    for (int q = 0; q < 3; ++q) {
        for (std::size_t j = 0; j < g.size(); ++j) profiles.push_back(std::sin((q + 1) * g[j]) + q);
    }
    const auto batch = caputo_derivative_batch(profiles, 3, g, 0.7);
    for (std::size_t q = 0; q < 3; ++q) {
        const std::vector<double> one(profiles.begin() + static_cast<long>(q * g.size()),
                                      profiles.begin() + static_cast<long>((q + 1) * g.size()));
        const auto single = caputo_derivative(one, g, 0.7);
        for (std::size_t j = 0; j < single.size(); ++j) CHECK(batch[q * single.size() + j] == single[j]);
    }
    CHECK_THROWS(caputo_derivative_batch(profiles, 2, g, 0.7));
}

TEST_CASE("kernel differences stay accurate far from the current node") {
    // nodes spanning 30 decades, where direct subtraction of the powers cancels completely
    std::vector<double> nodes{0.0};
    for (int k = -20; k <= 10; ++k) nodes.push_back(std::pow(10.0, k));
    const XGrid g = XGrid::from_nodes(nodes);
    std::vector<double> w;
    const std::size_t j = g.size() - 1;
    l1_kernel_differences(g, j, 0.3, w);
    REQUIRE(w.size() == j);
    for (std::size_t k = 0; k < j; ++k) {
        const long double a = std::pow(static_cast<long double>(g[j]) - g[k], 0.7L);
        const long double b = std::pow(static_cast<long double>(g[j]) - g[k + 1], 0.7L);
        // long double still cancels for the tiniest intervals; compare against the first-order term there
        const long double step = static_cast<long double>(g[k + 1]) - g[k];
        const long double far = static_cast<long double>(g[j]) - g[k + 1];
        const double expected = step < 1e-6L * far ? static_cast<double>(0.7L * step * std::pow(far, -0.3L))
                                                   : static_cast<double>(a - b);
        INFO("k = " << k);
        CHECK(w[k] > 0.0);
        CHECK(w[k] == doctest::Approx(expected).epsilon(1e-6));
    }
}
