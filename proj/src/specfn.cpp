#include "degfrac/specfn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "degfrac/fode.hpp"

namespace degfrac::specfn {

namespace {

using real = long double;

// Stirling tail sum B_2k / (2k(2k-1) x^(2k-1)), k = 1..8; accurate to < 1e-19 for x >= 10.
real stirling_tail(real x) {
    static constexpr std::array<real, 8> kCoeff{
        1.0L / 12.0L,       -1.0L / 360.0L,       1.0L / 1260.0L,   -1.0L / 1680.0L,
        1.0L / 1188.0L,     -691.0L / 360360.0L,  1.0L / 156.0L,    -3617.0L / 122400.0L,
    };
    const real inv = 1.0L / x;
    const real inv2 = inv * inv;
    real acc = 0.0L;
    for (auto it = kCoeff.rbegin(); it != kCoeff.rend(); ++it) acc = acc * inv2 + *it;
    return acc * inv;
}

constexpr real kShiftTarget = 10.0L;

std::size_t shift_count(real x) {
    return x >= kShiftTarget ? 0 : static_cast<std::size_t>(std::ceil(kShiftTarget - x));
}

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// Neumaier-compensated accumulator.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + carry; }
};

void check_argument(double z) {
    if (!std::isfinite(z)) throw InvalidArgument("Kilbas-Saigo argument must be finite");
    if (z > 0.0) throw InvalidArgument("only the negative real axis z <= 0 is supported");
}

double series_tolerance(const KSParams& p) {
    return p.is_mittag_leffler() && p.alpha < 1.0 ? kSeriesToleranceMittagLeffler : kSeriesTolerance;
}

// E_alpha(-x), 0 < alpha < 1, x > 0, from
//   E_alpha(-x) = sin(alpha pi)/(alpha pi) int_0^inf exp(-v^(1/alpha)) x / (v^2 + 2 v x cos(alpha pi) + x^2) dv.
double mittag_leffler_integral(double alpha, double x) {
    const double c = std::cos(alpha * std::numbers::pi);
    const double s = std::sin(alpha * std::numbers::pi);
    const double inv_alpha = 1.0 / alpha;
    auto f = [&](double v) {
        const double den = v * v + 2.0 * v * x * c + x * x;
        return std::exp(-std::pow(v, inv_alpha)) * x / den;
    };
    // exp(-v^(1/alpha)) < 1e-18 beyond v = 41^alpha
    const double v_max = std::pow(41.0, alpha);
    std::vector<double> cuts{0.0, v_max, std::min(1.0, v_max), std::min(x, v_max)};
    if (c < 0.0) {
        const double peak = -x * c;
        const double width = x * s;
        for (double b : {peak - width, peak, peak + width}) {
            if (b > 0.0 && b < v_max) cuts.push_back(b);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    using boost::math::quadrature::gauss_kronrod;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (!(cuts[i + 1] > cuts[i])) continue;
        total += gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 8, 1e-14);
    }
    return total * s / (alpha * std::numbers::pi);
}

// L1 solve of D^alpha X = -t x^beta X on [0,1]: X(1) = E(-t).
double ks_ode(const KSParams& p, double t) {
    if (p.alpha == 1.0) return std::exp(-t / p.m);
    const double beta = p.beta();
    const auto grid = fode::XGrid::graded(kOdeFallbackSteps, 1.0, fode::default_grading(p.alpha));
    return fode::caputo_l1_solve(t, p.alpha, beta, grid, 1.0).values.back();
}

double fallback_value(const KSParams& p, double t, EvalPath& used) {
    if (p.has_mode_equation() && p.alpha == 1.0) {
        used = EvalPath::Ode;
        return std::exp(-t / p.m);
    }
    if (p.is_mittag_leffler()) {
        used = EvalPath::Integral;
        return mittag_leffler_integral(p.alpha, t);
    }
    if (p.has_mode_equation()) {
        used = EvalPath::Ode;
        return ks_ode(p, t);
    }
    throw NonConvergence("series rounding error too large and no fallback exists for alpha=" +
                         std::to_string(p.alpha) + ", m=" + std::to_string(p.m) + ", l=" + std::to_string(p.l));
}

double evaluate(const KSSeries& series, double z, EvalPath path) {
    const KSParams& p = series.params;
    if (z == 0.0) return 1.0;
    const double t = -z;
    switch (path) {
    case EvalPath::Auto: {
        // exact closed form; the alternating series would lose digits to cancellation
        if (p.has_mode_equation() && p.alpha == 1.0) return std::exp(z / p.m);
        const SeriesSum s = ks_series_sum(series, z);
        if (s.converged && s.error_estimate <= series_tolerance(p)) return s.value;
        EvalPath used = EvalPath::Auto;
        return fallback_value(p, t, used);
    }
    case EvalPath::Series: {
        const SeriesSum s = ks_series_sum(series, z);
        if (!s.converged || s.error_estimate > series_tolerance(p)) {
            throw NonConvergence("series at z=" + std::to_string(z) + " has rounding estimate " +
                                 std::to_string(s.error_estimate));
        }
        return s.value;
    }
    case EvalPath::Ode:
        if (!p.has_mode_equation()) throw InvalidArgument("ODE route needs m = l + 1");
        return ks_ode(p, t);
    case EvalPath::Integral:
        if (!p.is_mittag_leffler() || p.alpha >= 1.0) {
            throw InvalidArgument("integral route needs Mittag-Leffler parameters with alpha < 1");
        }
        return mittag_leffler_integral(p.alpha, t);
    }
    throw InvalidArgument("unknown evaluation path");
}

} // namespace

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument("log_gamma needs a positive finite argument");
    real y = x;
    const std::size_t n = shift_count(y);
    real prod = 1.0L; // Gamma(x) = Gamma(x + n) / prod
    for (std::size_t k = 0; k < n; ++k) prod *= y + static_cast<real>(k);
    y += static_cast<real>(n);
    const real half_log_2pi = 0.918938533204672741780329736405617639861L;
    const real lg = (y - 0.5L) * std::log(y) - y + half_log_2pi + stirling_tail(y);
    return static_cast<double>(lg - std::log(prod));
}

double gamma_ratio(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw InvalidArgument("gamma_ratio needs positive finite arguments");
    }
    if (a == b) return 1.0;
    // Shift both arguments by the same integer so Stirling applies, keeping a - b exact.
    const std::size_t n = std::max(shift_count(a), shift_count(b));
    real correction = 1.0L; // prod (b+k) / prod (a+k)
    for (std::size_t k = 0; k < n; ++k) {
        correction *= (static_cast<real>(b) + k) / (static_cast<real>(a) + k);
    }
    const real as = static_cast<real>(a) + n;
    const real bs = static_cast<real>(b) + n;
    const real d = static_cast<real>(a) - static_cast<real>(b);
    // (as - 1/2) ln as - (bs - 1/2) ln bs - d, rearranged to avoid cancellation
    const real log_ratio =
        (as - 0.5L) * std::log1p(d / bs) + d * std::log(bs) - d + (stirling_tail(as) - stirling_tail(bs));
    const double ratio = static_cast<double>(std::exp(log_ratio) * correction);
#ifdef DEGFRAC_MUTATE_GAMMA_RATIO
    return ratio * (1.0 + 1e-3);
#else
    return ratio;
#endif
}

KSParams KSParams::from_mode_equation(double alpha, double beta) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0,1]");
    if (!(beta > -alpha) || !std::isfinite(beta)) throw InvalidArgument("beta must exceed -alpha");
    return KSParams{alpha, beta / alpha + 1.0, beta / alpha};
}

void KSParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("Kilbas-Saigo alpha must lie in (0,1]");
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("Kilbas-Saigo m must be positive");
    if (!std::isfinite(l)) throw InvalidArgument("Kilbas-Saigo l must be finite");
    // alpha(jm + l) + 1 is increasing in j, so j = 0 is the binding case
    if (!(alpha * l + 1.0 > 0.0)) throw InvalidArgument("Kilbas-Saigo parameters need alpha*l + 1 > 0");
}

bool KSParams::is_mittag_leffler() const noexcept { return nearly_equal(m, 1.0) && std::abs(l) <= 1e-12; }

bool KSParams::has_mode_equation() const noexcept { return nearly_equal(m, l + 1.0); }

KSSeries ks_coefficients(const KSParams& params, std::size_t count) {
    params.validate();
    if (count == 0) throw InvalidArgument("coefficient count must be positive");
    KSSeries out{params, {}};
    out.coefficients.resize(count + 1);
    out.coefficients[0] = 1.0;
    const double a = params.alpha;
    for (std::size_t i = 1; i <= count; ++i) {
        const double prev = out.coefficients[i - 1];
        if (prev == 0.0) {
            out.coefficients[i] = 0.0;
            continue;
        }
        const double arg = a * (static_cast<double>(i - 1) * params.m + params.l) + 1.0;
        out.coefficients[i] = prev * gamma_ratio(arg, arg + a);
    }
    return out;
}

SeriesSum ks_series_sum(const KSSeries& series, double z) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const auto& c = series.coefficients;
    SeriesSum out;
    CompensatedSum acc;
    double weighted_abs = 0.0;
    double max_abs = 0.0;
    double power = 1.0;
    int small_run = 0;
    for (std::size_t i = 0; i < c.size() && i <= kSeriesCap; ++i) {
        const double term = c[i] == 0.0 ? 0.0 : c[i] * power;
        if (!std::isfinite(term)) break;
        acc.add(term);
        const double mag = std::abs(term);
        max_abs = std::max(max_abs, mag);
        weighted_abs += static_cast<double>(i + 1) * mag;
        out.terms = i + 1;
        out.error_estimate = eps * weighted_abs;
        if (out.error_estimate > 1.0) break; // hopeless; leave converged = false
        small_run = mag < 1e-16 * max_abs ? small_run + 1 : 0;
        if (small_run >= 3) {
            out.converged = true;
            break;
        }
        power *= z;
        if (!std::isfinite(power)) break;
    }
    out.value = acc.value();
    return out;
}

double kilbas_saigo(const KSParams& params, double z, EvalPath path) {
    params.validate();
    check_argument(z);
    return evaluate(ks_coefficients(params, kSeriesCap), z, path);
}

double mittag_leffler(double alpha, double z, EvalPath path) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("Mittag-Leffler alpha must lie in (0,1]");
    check_argument(z);
    // direct coefficients 1/Gamma(alpha i + 1), independent of the ratio recurrence
    KSSeries series{KSParams{alpha, 1.0, 0.0}, std::vector<double>(kSeriesCap + 1)};
    for (std::size_t i = 0; i <= kSeriesCap; ++i) {
        const double arg = alpha * static_cast<double>(i) + 1.0;
        series.coefficients[i] = std::exp(-log_gamma(arg));
    }
    return evaluate(series, z, path);
}

CrossCheck ks_cross_check(const KSParams& params, double z) {
    params.validate();
    check_argument(z);
    const KSSeries series = ks_coefficients(params, kSeriesCap);
    const SeriesSum s = ks_series_sum(series, z);
    if (!s.converged) throw NonConvergence("series did not converge at z=" + std::to_string(z));
    CrossCheck out;
    out.series = s.value;
    out.fallback = z == 0.0 ? 1.0 : fallback_value(params, -z, out.fallback_path);
    out.difference = std::abs(out.series - out.fallback);
    const double fallback_tol = out.fallback_path == EvalPath::Ode && params.alpha < 1.0 ? kOdeFallbackTolerance
                                                                                         : kSeriesToleranceMittagLeffler;
    const double combined = s.error_estimate + fallback_tol;
    if (out.difference > 10.0 * combined) {
        throw NonConvergence("series and fallback disagree by " + std::to_string(out.difference) + " at z=" +
                             std::to_string(z));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// Graded part of the fallback table covers t <= kTableKnee; geometric beyond.
constexpr double kTableKnee = 4.0;
constexpr std::size_t kTableGradedSteps = 2048;
constexpr double kTableRelativeStep = 2e-3; // relative growth of t per geometric step

} // namespace

KSEvaluator::KSEvaluator(const KSParams& params, double t_max, Fallback fallback)
    : series_(ks_coefficients(params, kSeriesCap)),
      t_max_(t_max),
      series_tol_(series_tolerance(params)),
      fallback_(fallback) {
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw InvalidArgument("t_max must be finite and nonnegative");

    // Rounding in the alternating series grows monotonically with t; bisect for the switch point.
    auto series_ok = [&](double t) {
        const SeriesSum s = ks_series_sum(series_, -t);
        return s.converged && s.error_estimate <= series_tol_;
    };
    if (series_ok(t_max)) {
        series_limit_ = t_max;
    } else {
        double lo = 0.0;
        double hi = t_max;
        for (int it = 0; it < 60 && hi - lo > 1e-12 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (series_ok(mid) ? lo : hi) = mid;
        }
        series_limit_ = lo;
    }
    if (series_limit_ >= t_max) return;

    const KSParams& p = series_.params;
    if (p.has_mode_equation() && p.alpha == 1.0) return;
    if (p.is_mittag_leffler() && fallback_ == Fallback::Best) return;
    if (!p.has_mode_equation()) {
        throw NonConvergence("no fallback for E_{alpha,m,l} beyond t=" + std::to_string(series_limit_));
    }

    // Solve D^alpha X = -x^beta X once; X(x) = E(-x^g), g = alpha + beta.
    const double g = p.alpha + p.beta();
    const double knee = std::min(t_max, kTableKnee);
    const double x_knee = std::pow(knee, 1.0 / g);
    const double r = fode::default_grading(p.alpha);
    std::vector<double> nodes;
    nodes.reserve(kTableGradedSteps + 1);
    for (std::size_t j = 0; j <= kTableGradedSteps; ++j) {
        nodes.push_back(x_knee * std::pow(static_cast<double>(j) / kTableGradedSteps, r));
    }
    nodes.back() = x_knee;
    if (t_max > knee) {
        const double ratio = std::pow(1.0 + kTableRelativeStep, 1.0 / g);
        const double x_end = std::pow(t_max, 1.0 / g);
        double x = x_knee;
        while (x < x_end) {
            x = std::min(x * ratio, x_end * (1.0 + 1e-12));
            nodes.push_back(x);
        }
    }
    // append two guard nodes so cubic stencils never run off the end
    for (int k = 0; k < 2; ++k) nodes.push_back(nodes.back() * std::pow(1.0 + kTableRelativeStep, 1.0 / g));

    const auto grid = fode::XGrid::from_nodes(nodes);
    auto sol = fode::caputo_l1_solve(1.0, p.alpha, p.beta(), grid, 1.0);
    table_x_ = std::move(nodes);
    table_value_ = std::move(sol.values);
}

double KSEvaluator::operator()(double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("KSEvaluator needs t >= 0");
    if (t == 0.0) return 1.0;
    if (t > t_max_ * (1.0 + 1e-12)) throw InvalidArgument("t beyond the evaluator range");
    const KSParams& p = series_.params;
    if (p.has_mode_equation() && p.alpha == 1.0) return std::exp(-t / p.m);
    if (t <= series_limit_) return ks_series_sum(series_, -t).value;
    if (!table_x_.empty()) return from_table(t);
    return mittag_leffler_integral(p.alpha, t);
}

double KSEvaluator::from_table(double t) const {
    const double g = series_.params.alpha + series_.params.beta();
    const double x = std::pow(t, 1.0 / g);
    const std::size_t n = table_x_.size();
    auto it = std::upper_bound(table_x_.begin(), table_x_.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - table_x_.begin());
    hi = std::clamp<std::size_t>(hi, 2, n - 2);
    const std::size_t first = hi - 2; // stencil first..first+3 brackets x in the middle interval
    double value = 0.0;
    for (std::size_t i = first; i < first + 4; ++i) {
        double w = 1.0;
        for (std::size_t k = first; k < first + 4; ++k) {
            if (k != i) w *= (x - table_x_[k]) / (table_x_[i] - table_x_[k]);
        }
        value += w * table_value_[i];
    }
    return value;
}

} // namespace degfrac::specfn
