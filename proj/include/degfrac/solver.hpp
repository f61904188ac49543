#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "degfrac/fode.hpp"
#include "degfrac/spectral.hpp"

// Series solution u(x,y) = sum_n X_n(x) Y_n(y) of
//   D^alpha u + x^beta K(y) l(u) = 0,  u(0,y) = phi(y),  Y-boundary conditions of order s.
namespace degfrac::solver {

struct CoefficientSet {
    std::vector<double> phi;        ///< phi_n = sum_i w_i phi(y_i) Y_n(y_i) / K(y_i)
    std::vector<double> lambda_phi; ///< lambda_n phi_n, the coefficients of K l(phi)
    /// Quadrature of int K (l phi)^2 dy with the discrete l.
    double bessel_budget = 0.0;
    /// |K l(phi) - sum_n lambda_n phi_n Y_n|^2 in the 1/K-weighted norm: the part of the
    /// budget carried by modes beyond the computed spectrum.
    double remainder = 0.0;

    std::size_t count() const noexcept { return phi.size(); }
};

std::vector<double> sample_phi(const spectral::ProblemSpec& spec, const spectral::Grid& grid);

CoefficientSet fourier_coeffs(const spectral::ProblemSpec& spec, const spectral::Spectrum& spectrum,
                              const spectral::DiscreteOperator& op, const spectral::Grid& grid);

struct HypothesisCheck {
    std::string name;
    bool passed = true;
    double magnitude = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct HypothesisReport {
    std::vector<HypothesisCheck> checks;
    bool all_passed() const;
};

/// Sufficient conditions on phi for the series to converge: endpoint derivatives of phi,
/// boundedness of its divided differences up to order 2s under refinement, and
/// endpoint vanishing of the derivatives of K l(phi). Never throws on failed conditions;
/// they come back as warnings.
HypothesisReport check_hypotheses(const spectral::ProblemSpec& spec, const spectral::Grid& grid);

/// eps(N) = sqrt(sum_{n>N} (lambda_n phi_n)^2 + remainder) * sqrt(max_i sum_j w_j G_ij^2 / K_j):
/// a sup-norm bound for the part of the series beyond mode N.
double truncation_bound(const CoefficientSet& coeffs, const std::vector<double>& kernel_row_norms, std::size_t N);

struct Truncation {
    std::size_t N = 0;
    double epsilon = 0.0;
    bool capped = false; ///< tolerance not reached within the computed spectrum
};

/// Smallest N with eps(N) <= tolerance, capped by the spectrum size.
Truncation select_truncation(const CoefficientSet& coeffs, const std::vector<double>& kernel_row_norms,
                             double tolerance);

struct Field {
    std::vector<double> x;
    std::vector<double> y;
    Eigen::MatrixXd u; ///< u(x_j, y_i) at row j, column i
    std::size_t N = 0;
    double epsilon = 0.0;
    bool capped = false;
    /// sum_n |phi_n| max_i |Y_n(y_i)|: the bound on |u| that follows from |E| <= 1.
    double amplitude_bound = 0.0;
};

Field assemble(const spectral::ProblemSpec& spec, const spectral::Spectrum& spectrum, const CoefficientSet& coeffs,
               const fode::XGrid& xgrid, const spectral::Grid& grid, std::size_t N);

struct ResidualReport {
    double max_interior = 0.0;
    /// sqrt(sum_j (x_j - x_{j-1}) sum_i w_i r_ji^2) over x_j > 0
    double l2_interior = 0.0;
    /// max_i |K l(phi)| at x = 0, the magnitude of either term of the equation
    double scale = 0.0;
    /// max over x of the one-sided estimate of |d^j u / dy^j| at y = 0 and y = 1, j = 0..s-1
    std::vector<double> boundary_defect;
    double initial_defect = 0.0; ///< max_i |u(0, y_i) - phi(y_i)|
};

ResidualReport residual(const Field& field, const spectral::ProblemSpec& spec, const spectral::DiscreteOperator& op,
                        const fode::XGrid& xgrid, const spectral::Grid& grid);

/// Independent full discretization: L1 in x, the same finite differences in y,
///   (a_{j,j-1} W + x_j^beta A) U_j = W (a_{j,j-1} U_{j-1} - history_j),
/// one banded Cholesky solve per x-step.
Eigen::MatrixXd direct_solve(const spectral::ProblemSpec& spec, const spectral::DiscreteOperator& op,
                             const fode::XGrid& xgrid, const spectral::Grid& grid);

/// One-sided finite-difference weights for the derivative of order `order` at x0
/// from the given nodes (Fornberg's recursion).
std::vector<double> fd_weights(double x0, const std::vector<double>& nodes, int order);

std::string field_csv(const Field& field);

} // namespace degfrac::solver
