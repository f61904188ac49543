#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "degfrac/expr.hpp"

// The y-problem  l(Y) = lambda Y / K  on (0,1),  Y^(j)(0) = Y^(j)(1) = 0 for j < s,
// with l(u) = sum_{j=0}^{s} (-1)^j (p_j u^(j))^(j) and p_s = 1.
namespace degfrac::spectral {

/// A problem parameter is out of range; key() names the offending field.
class InvalidProblem : public std::invalid_argument {
public:
    InvalidProblem(std::string key, const std::string& message)
        : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// LAPACK reported a failure.
class EigenFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// More modes were requested than the grid resolves.
class ResolutionError : public std::runtime_error {
public:
    ResolutionError(std::size_t requested, std::size_t max_reliable);
    std::size_t max_reliable() const noexcept { return max_reliable_; }

private:
    std::size_t max_reliable_;
};

struct ProblemSpec {
    double alpha = 0.5;
    double beta = 0.0;
    int s = 1;
    /// Degeneracy exponent of K at y = 0 (K ~ y^m); estimated from K when not given.
    double m = 0.0;
    expr::Expr K = expr::Expr::constant(1.0, "y");
    std::vector<expr::Expr> p{expr::Expr::constant(0.0, "y")}; ///< p_0..p_{s-1}
    expr::Expr phi = expr::Expr::constant(0.0, "y");

    /// Scalar checks (alpha, beta, s, size of p, m). Sampled checks happen in build_operator.
    void validate() const;
};

/// Slope of log K against log y close to 0, i.e. the m in K ~ y^m.
double estimate_degeneracy(const expr::Expr& K);

/// Uniform interior grid y_i = (i + (s-1)/2) h, h = 1/(P + s), i = 1..P, weights w_i = h.
///
/// The half-step shift for even s centres the s ghost nodes beyond each end
/// symmetrically about the endpoint, so the zero ghost extension imposes the
/// boundary conditions to second order.
class Grid {
public:
    static Grid uniform(std::size_t points, int s);

    std::size_t size() const noexcept { return y_.size(); }
    int order() const noexcept { return s_; }
    double h() const noexcept { return h_; }
    double y(std::size_t i) const { return y_[i]; }
    double w(std::size_t i) const { return w_[i]; }
    const std::vector<double>& nodes() const noexcept { return y_; }
    const std::vector<double>& weights() const noexcept { return w_; }
    /// Position of virtual node index k (k may be negative or >= size()).
    double position(double k) const noexcept { return (k + 1.0 + 0.5 * (s_ - 1)) * h_; }

private:
    Grid(std::vector<double> y, std::vector<double> w, double h, int s);
    std::vector<double> y_;
    std::vector<double> w_;
    double h_ = 0.0;
    int s_ = 1;
};

/// A v = lambda W v: A = sum_j D_j^T diag(h p_j) D_j / h^(2j) (banded, bandwidth s),
/// W = diag(w / K).
class DiscreteOperator {
public:
    std::size_t size() const noexcept { return k_.size(); }
    int bandwidth() const noexcept { return s_; }
    /// A(i, i+d) for 0 <= d <= s.
    double band(std::size_t i, int d) const { return band_[static_cast<std::size_t>(d) + i * (s_ + 1)]; }
    /// LAPACK lower band storage, (s+1) x P column-major.
    const std::vector<double>& band_storage() const noexcept { return band_; }
    const std::vector<double>& K() const noexcept { return k_; }
    const std::vector<double>& weights() const noexcept { return w_; }
    double W(std::size_t i) const { return w_[i] / k_[i]; }

    Eigen::MatrixXd dense() const;
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    /// Discrete l(v): (A v)_i / w_i.
    Eigen::VectorXd apply_l(const Eigen::VectorXd& v) const;
    /// v^T A v summed as sum_j sum_k h^(1-2j) p_j (D_j v)_k^2, which keeps full relative
    /// accuracy where the assembled matrix product would cancel.
    double energy(const Eigen::VectorXd& v) const;

private:
    friend DiscreteOperator build_operator(const ProblemSpec& spec, const Grid& grid);
    int s_ = 1;
    std::vector<double> band_;
    std::vector<std::vector<double>> row_weight_; // [j][k] = h^(1-2j) p_j at the centre of row k of D_j
    std::vector<double> k_;
    std::vector<double> w_;
};

DiscreteOperator build_operator(const ProblemSpec& spec, const Grid& grid);

struct Spectrum {
    std::vector<double> lambda;    ///< ascending
    Eigen::MatrixXd Y;             ///< column n-1 holds Y_n at the grid nodes
    std::vector<std::size_t> near_degenerate; ///< n (1-based) with lambda_{n+1} - lambda_n < 1e-8 lambda_n
    bool normalized = false;       ///< sum_i w_i Y_n^2 / K_i = 1

    std::size_t count() const noexcept { return lambda.size(); }
};

/// Largest mode count the grid is trusted to resolve.
std::size_t max_reliable_modes(std::size_t points);

/// Lowest `count` eigenpairs of the banded symmetric matrix B = W^-1/2 A W^-1/2:
/// eigenvalues from LAPACK bisection, eigenvectors by shifted inverse iteration with
/// Gram-Schmidt against the modes already found, eigenvalues then refined by the
/// Rayleigh quotient in energy form. Throws ResolutionError when count exceeds
/// max_reliable_modes.
Spectrum solve_eigs(const DiscreteOperator& op, std::size_t count);

struct Kernel {
    Eigen::MatrixXd G;    ///< discrete Green's function: u_i = sum_j w_j G_ij f_j solves l(u) = f
    Eigen::MatrixXd Gbar; ///< G_ij / sqrt(K_i K_j), exactly symmetric
};

Kernel green_kernel(const DiscreteOperator& op, const Grid& grid);

/// Eigenpairs of the weighted kernel operator  sum_j Gbar_ij w_j v_j = mu v_i;
/// lambda = 1/mu, Y = sqrt(K) v.
Spectrum nystrom_eigs(const Kernel& kernel, const DiscreteOperator& op, const Grid& grid, std::size_t count);

/// max_ij |Gbar_ij - sum_{n<=N} Ybar_n(y_i) Ybar_n(y_j) / lambda_n|, Ybar = Y / sqrt(K),
/// using the first N modes of the spectrum (all when N exceeds the count).
double mercer_check(const Spectrum& spectrum, const Kernel& kernel, const DiscreteOperator& op, std::size_t N);

/// sum_j w_j G_ij^2 / K_j for each node i.
std::vector<double> kernel_row_norms(const Kernel& kernel, const DiscreteOperator& op);

/// Largest violation of  sum_{n<=N} (Y_n(y_i)/lambda_n)^2 <= sum_j w_j G_ij^2/K_j + slack
/// over all nodes and all N up to the spectrum size; <= 0 means the inequality holds.
double bessel_kernel_violation(const Spectrum& spectrum, const Kernel& kernel, const DiscreteOperator& op,
                               double slack = 1e-6);

std::string eigenvalues_csv(const Spectrum& spectrum);
/// Columns y, Y_1, ..., Y_N.
std::string eigenfunctions_csv(const Spectrum& spectrum, const Grid& grid);

} // namespace degfrac::spectral
