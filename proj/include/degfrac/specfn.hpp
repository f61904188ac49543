#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace degfrac::specfn {

/// Bad parameters or arguments (nonpositive gamma argument, z > 0, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Neither evaluation route produced a trustworthy value, or two routes disagree.
class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// log Gamma(x) for x > 0.
double log_gamma(double x);

/// Gamma(a) / Gamma(b) without forming either gamma value.
double gamma_ratio(double a, double b);

/// Parameters of the Kilbas-Saigo function E_{alpha,m,l}.
struct KSParams {
    double alpha = 0.5;
    double m = 1.0;
    double l = 0.0;

    /// The parameter map used by the fractional mode equation
    /// D^alpha X = -lambda x^beta X: m = beta/alpha + 1, l = beta/alpha.
    static KSParams from_mode_equation(double alpha, double beta);

    /// Throws InvalidArgument unless 0 < alpha <= 1, m > 0 and every gamma
    /// argument alpha(jm + l) + 1 of the coefficient product is positive.
    void validate() const;

    /// m = 1, l = 0: the Mittag-Leffler function E_alpha.
    bool is_mittag_leffler() const noexcept;
    /// m = l + 1: the function solves a fractional mode equation with beta = alpha*l.
    bool has_mode_equation() const noexcept;
    double beta() const noexcept { return alpha * l; }
};

/// Coefficients c_0..c_I of E_{alpha,m,l}(z) = sum c_i z^i.
struct KSSeries {
    KSParams params;
    std::vector<double> coefficients;

    std::size_t truncation_index() const noexcept { return coefficients.empty() ? 0 : coefficients.size() - 1; }
};

/// c_0..c_count by the ratio recurrence c_i = c_{i-1} Gamma(a_{i-1}) / Gamma(a_{i-1} + alpha),
/// a_j = alpha(jm + l) + 1.
KSSeries ks_coefficients(const KSParams& params, std::size_t count);

/// Evaluation route for the negative real axis.
enum class EvalPath {
    Auto,     ///< power series where its rounding estimate is small enough, else the best fallback
    Series,   ///< power series only; throws NonConvergence if the rounding estimate exceeds tolerance
    Ode,      ///< L1 solve of the mode equation (requires m = l + 1)
    Integral, ///< Laplace-type integral representation (Mittag-Leffler parameters only)
};

struct SeriesSum {
    double value = 0.0;
    double error_estimate = 0.0; ///< rounding estimate eps * sum (1 + i)|c_i z^i|
    std::size_t terms = 0;
    bool converged = false;
};

/// Compensated summation of sum c_i z^i with the stopping rule
/// |c_i z^i| < 1e-16 max|c_j z^j| for three consecutive terms, at most kSeriesCap terms.
SeriesSum ks_series_sum(const KSSeries& series, double z);

inline constexpr std::size_t kSeriesCap = 400;
/// Series accepted when its rounding estimate is below this (general parameters).
inline constexpr double kSeriesTolerance = 1e-8;
/// Tighter acceptance for Mittag-Leffler parameters, whose fallback is accurate to ~1e-13.
inline constexpr double kSeriesToleranceMittagLeffler = 1e-12;
/// Accuracy target of the L1 fallback.
inline constexpr double kOdeFallbackTolerance = 1e-4;
/// Grid size of the one-shot L1 fallback.
inline constexpr std::size_t kOdeFallbackSteps = 4096;

/// E_{alpha,m,l}(z) for z <= 0.
double kilbas_saigo(const KSParams& params, double z, EvalPath path = EvalPath::Auto);

/// E_alpha(z) = sum z^i / Gamma(alpha i + 1) for 0 < alpha <= 1, z <= 0.
double mittag_leffler(double alpha, double z, EvalPath path = EvalPath::Auto);

/// Both routes at one point. Throws NonConvergence when they disagree by more
/// than 10x the combined tolerance.
struct CrossCheck {
    double series = 0.0;
    double fallback = 0.0;
    double difference = 0.0;
    EvalPath fallback_path = EvalPath::Ode;
};
CrossCheck ks_cross_check(const KSParams& params, double z);

/// Repeated evaluation of t -> E_{alpha,m,l}(-t) for t in [0, t_max].
///
/// Series coefficients are computed once; for mode-equation parameters outside
/// the series range the values come from a single L1 solve on a graded-then-
/// geometric mesh, interpolated with local cubics. Immutable after construction.
class KSEvaluator {
public:
    enum class Fallback {
        Best,    ///< exact exponential, the Mittag-Leffler integral, or the L1 table, in that order
        OdeTable ///< always the L1 table (mode-equation parameters); used to validate the table
    };

    KSEvaluator(const KSParams& params, double t_max, Fallback fallback = Fallback::Best);

    /// E(-t), 0 <= t <= t_max.
    double operator()(double t) const;

    const KSParams& params() const noexcept { return series_.params; }
    double t_max() const noexcept { return t_max_; }
    /// Largest t at which the series is still used (0 when never trusted).
    double series_limit() const noexcept { return series_limit_; }

private:
    double from_table(double t) const;

    KSSeries series_;
    double t_max_ = 0.0;
    double series_limit_ = 0.0;
    double series_tol_ = kSeriesTolerance;
    Fallback fallback_ = Fallback::Best;
    // L1 fallback table in the mode-equation variable x, t = x^(alpha+beta)
    std::vector<double> table_x_;
    std::vector<double> table_value_;
};

} // namespace degfrac::specfn
