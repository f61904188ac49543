#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

// Fractional mode equation  D^alpha X(x) = -lambda x^beta X(x),  X(0) = x0,
// with the Caputo derivative of order 0 < alpha < 1.
namespace degfrac::fode {

class InvalidGrid : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Nodes 0 = x_0 < x_1 < ... < x_M.
class XGrid {
public:
    /// x_j = x_max (j/M)^r.
    static XGrid graded(std::size_t intervals, double x_max, double grading);
    /// Arbitrary strictly increasing nodes starting at 0.
    static XGrid from_nodes(std::vector<double> nodes);

    std::size_t intervals() const noexcept { return nodes_.size() - 1; }
    std::size_t size() const noexcept { return nodes_.size(); }
    double operator[](std::size_t j) const { return nodes_[j]; }
    std::span<const double> nodes() const noexcept { return nodes_; }
    double x_max() const noexcept { return nodes_.back(); }
    double grading() const noexcept { return grading_; }

private:
    explicit XGrid(std::vector<double> nodes, double grading);
    std::vector<double> nodes_;
    double grading_ = 1.0;
};

/// out[k] = (x_j - x_k)^(1-alpha) - (x_j - x_{k+1})^(1-alpha) for k < j, the L1 weights
/// without the 1/(Gamma(2-alpha) step) factor. Evaluated without cancellation when
/// x_j is far from the interval, which matters on strongly graded or geometric grids.
void l1_kernel_differences(const XGrid& grid, std::size_t j, double alpha, std::vector<double>& out);

/// Default grading exponent 2/alpha (resolves the x^alpha initial layer).
double default_grading(double alpha);

struct ModeAmplitude {
    double lambda = 0.0;
    double phi = 0.0; ///< X(0)
    std::vector<double> values;
};

/// phi_n E_{alpha, beta/alpha+1, beta/alpha}(-lambda_n x^(alpha+beta)).
double ks_solution(double phi_n, double lambda_n, double alpha, double beta, double x);

/// Implicit L1 scheme on an arbitrary (usually graded) grid. At node x_j the discrete
/// Caputo derivative sum_k a_{j,k}(X_{k+1} - X_k) equals -lambda x_j^beta X_j, with
///   a_{j,k} = [(x_j - x_k)^(1-alpha) - (x_j - x_{k+1})^(1-alpha)] / [Gamma(2-alpha)(x_{k+1} - x_k)].
/// x^beta is never evaluated at x_0 = 0, so -alpha < beta < 0 is fine.
ModeAmplitude caputo_l1_solve(double lambda, double alpha, double beta, const XGrid& grid, double x0);

/// L1 Caputo derivative of sampled values at x_1..x_M (result has M entries).
std::vector<double> caputo_derivative(std::span<const double> values, const XGrid& grid, double alpha);

/// Same, for several profiles sharing one grid: profiles is row-major
/// [profile][node], the result [profile][node-1]. Weights are computed once per node.
std::vector<double> caputo_derivative_batch(std::span<const double> profiles, std::size_t profile_count,
                                            const XGrid& grid, double alpha);

} // namespace degfrac::fode
