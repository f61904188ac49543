#include "degfrac/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <lapacke.h>

namespace degfrac::spectral {

namespace {

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double sample(const expr::Expr& e, double y, const std::string& key) {
    try {
        return e.eval(y);
    } catch (const expr::DomainError& err) {
        throw InvalidProblem(key, "cannot be evaluated at y=" + expr::format_double(y) + " (" + err.what() + ")");
    }
}

// Index of the first component within a relative 1e-8 of the largest magnitude.
// The slack makes the choice insensitive to rounding when two extrema tie.
Eigen::Index sign_anchor(const Eigen::VectorXd& v) {
    const double top = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= (1.0 - 1e-8) * top) return i;
    }
    return 0;
}

void finish_spectrum(Spectrum& sp, const DiscreteOperator& op) {
    const std::size_t P = op.size();
    for (Eigen::Index n = 0; n < sp.Y.cols(); ++n) {
        auto col = sp.Y.col(n);
        double norm2 = 0.0;
        for (std::size_t i = 0; i < P; ++i) norm2 += op.W(i) * col[i] * col[i];
        col /= std::sqrt(norm2);
        if (col[sign_anchor(col)] < 0.0) col = -col;
    }
    sp.normalized = true;
    sp.near_degenerate.clear();
    for (std::size_t n = 0; n + 1 < sp.lambda.size(); ++n) {
        if (sp.lambda[n + 1] - sp.lambda[n] < 1e-8 * std::abs(sp.lambda[n])) sp.near_degenerate.push_back(n + 1);
    }
}

void check_count(std::size_t count, std::size_t points) {
    if (count == 0) throw std::invalid_argument("mode count must be positive");
    const std::size_t limit = max_reliable_modes(points);
    if (count > limit) throw ResolutionError(count, limit);
}

} // namespace

ResolutionError::ResolutionError(std::size_t requested, std::size_t max_reliable)
    : std::runtime_error("requested " + std::to_string(requested) + " modes but the grid resolves at most " +
                         std::to_string(max_reliable)),
      max_reliable_(max_reliable) {}

void ProblemSpec::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidProblem("alpha", "must lie in (0,1)");
    if (!std::isfinite(beta) || !(beta > -alpha)) throw InvalidProblem("beta", "must be finite and exceed -alpha");
    if (s < 1) throw InvalidProblem("s", "order must be a positive integer");
    if (p.size() != static_cast<std::size_t>(s)) {
        throw InvalidProblem("p", "needs exactly s = " + std::to_string(s) + " coefficients p_0..p_{s-1}");
    }
    if (!std::isfinite(m) || m < 0.0 || m >= s) {
        throw InvalidProblem("K", "degeneracy exponent m = " + expr::format_double(m) + " must satisfy 0 <= m < s");
    }
}

double estimate_degeneracy(const expr::Expr& K) {
    const double y1 = 1e-6;
    const double y2 = 1e-5;
    const double k1 = sample(K, y1, "K");
    const double k2 = sample(K, y2, "K");
    if (!(k1 > 0.0) || !(k2 > 0.0)) throw InvalidProblem("K", "must be positive on (0,1]");
    const double m = std::log(k2 / k1) / std::log(y2 / y1);
    // snap values that are integers up to the finite-difference error of the slope
    return std::abs(m - std::round(m)) < 1e-3 ? std::round(m) : m;
}

Grid::Grid(std::vector<double> y, std::vector<double> w, double h, int s)
    : y_(std::move(y)), w_(std::move(w)), h_(h), s_(s) {}

Grid Grid::uniform(std::size_t points, int s) {
    if (s < 1) throw InvalidProblem("s", "order must be a positive integer");
    if (points < static_cast<std::size_t>(s) + 1) {
        throw InvalidProblem("ny", "needs at least s + 1 = " + std::to_string(s + 1) + " interior points");
    }
    const double h = 1.0 / static_cast<double>(points + static_cast<std::size_t>(s));
    std::vector<double> y(points);
    for (std::size_t i = 0; i < points; ++i) y[i] = (static_cast<double>(i) + 1.0 + 0.5 * (s - 1)) * h;
    return Grid(std::move(y), std::vector<double>(points, h), h, s);
}

Eigen::MatrixXd DiscreteOperator::dense() const {
    const std::size_t P = size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
    for (std::size_t i = 0; i < P; ++i) {
        for (int d = 0; d <= s_ && i + d < P; ++d) {
            const auto r = static_cast<Eigen::Index>(i + d);
            const auto c = static_cast<Eigen::Index>(i);
            A(r, c) = A(c, r) = band(i, d);
        }
    }
    return A;
}

Eigen::VectorXd DiscreteOperator::apply(const Eigen::VectorXd& v) const {
    const std::size_t P = size();
    if (static_cast<std::size_t>(v.size()) != P) throw std::invalid_argument("vector size does not match operator");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (std::size_t i = 0; i < P; ++i) {
        out[i] += band(i, 0) * v[i];
        for (int d = 1; d <= s_ && i + d < P; ++d) {
            const double a = band(i, d);
            out[i + d] += a * v[i];
            out[i] += a * v[i + d];
        }
    }
    return out;
}

Eigen::VectorXd DiscreteOperator::apply_l(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = apply(v);
    for (std::size_t i = 0; i < size(); ++i) out[i] /= w_[i];
    return out;
}

double DiscreteOperator::energy(const Eigen::VectorXd& v) const {
    const std::size_t P = size();
    if (static_cast<std::size_t>(v.size()) != P) throw std::invalid_argument("vector size does not match operator");
    std::vector<double> diff(v.data(), v.data() + P);
    double total = 0.0;
    for (std::size_t j = 0; j < row_weight_.size(); ++j) {
        if (j > 0) {
            // j-th differences of the zero-extended vector from the (j-1)-th ones
            std::vector<double> next(P + j);
            for (std::size_t k = 0; k < P + j; ++k) {
                const double hi = k < diff.size() ? diff[k] : 0.0;
                const double lo = k >= 1 ? diff[k - 1] : 0.0;
                next[k] = hi - lo;
            }
            diff = std::move(next);
        }
        for (std::size_t k = 0; k < diff.size(); ++k) total += row_weight_[j][k] * diff[k] * diff[k];
    }
    return total;
}

DiscreteOperator build_operator(const ProblemSpec& spec, const Grid& grid) {
    spec.validate();
    if (grid.order() != spec.s) throw std::invalid_argument("grid was built for a different order s");
    const std::size_t P = grid.size();
    const int s = spec.s;

    DiscreteOperator op;
    op.s_ = s;
    op.w_ = grid.weights();
    op.k_.resize(P);
    for (std::size_t i = 0; i < P; ++i) {
        const double k = sample(spec.K, grid.y(i), "K");
        if (!(k > 0.0)) {
            throw InvalidProblem("K", "must be positive at interior nodes; K(" + expr::format_double(grid.y(i)) +
                                          ") = " + expr::format_double(k));
        }
        op.k_[i] = k;
    }

    const auto kd = static_cast<std::size_t>(s);
    op.band_.assign((kd + 1) * P, 0.0);
    op.row_weight_.assign(kd + 1, {});
    const double h = grid.h();
    for (int j = 0; j <= s; ++j) {
        std::vector<double> stencil(static_cast<std::size_t>(j) + 1);
        for (int i = 0; i <= j; ++i) stencil[static_cast<std::size_t>(i)] = ((j - i) % 2 ? -1.0 : 1.0) * binomial(j, i);
        const double scale = h / std::pow(h, 2 * j);
        auto& row_weight = op.row_weight_[static_cast<std::size_t>(j)];
        row_weight.assign(P + static_cast<std::size_t>(j), 0.0);
        // row k of D_j touches zero-extended entries k-j .. k; rows with any interior entry are k = 0..P+j-1
        for (std::size_t k = 0; k < P + static_cast<std::size_t>(j); ++k) {
            double pj = 1.0;
            if (j < s) {
                const double centre = static_cast<double>(k) - 0.5 * j;
                const double y = std::clamp(grid.position(centre), 0.0, 1.0);
                pj = sample(spec.p[static_cast<std::size_t>(j)], y, "p");
                if (pj < 0.0) {
                    throw InvalidProblem("p", "p_" + std::to_string(j) + "(" + expr::format_double(y) +
                                                  ") = " + expr::format_double(pj) + " is negative");
                }
                if (pj == 0.0) continue;
            }
            const double coef = scale * pj;
            row_weight[k] = coef;
            for (int a = 0; a <= j; ++a) {
                const long ia = static_cast<long>(k) - j + a;
                if (ia < 0 || ia >= static_cast<long>(P)) continue;
                for (int b = a; b <= j; ++b) {
                    const long ib = static_cast<long>(k) - j + b;
                    if (ib >= static_cast<long>(P)) continue;
                    const auto d = static_cast<std::size_t>(ib - ia);
                    op.band_[d + static_cast<std::size_t>(ia) * (kd + 1)] +=
                        coef * stencil[static_cast<std::size_t>(a)] * stencil[static_cast<std::size_t>(b)];
                }
            }
        }
    }
    return op;
}

std::size_t max_reliable_modes(std::size_t points) { return std::max<std::size_t>(1, (points + 1) / 8); }

Spectrum solve_eigs(const DiscreteOperator& op, std::size_t count) {
    const std::size_t P = op.size();
    check_count(count, P);
    const int kd = op.bandwidth();
    const auto ld = static_cast<std::size_t>(kd) + 1;
    const auto n = static_cast<lapack_int>(P);

    std::vector<double> inv_sqrt_w(P);
    for (std::size_t i = 0; i < P; ++i) inv_sqrt_w[i] = 1.0 / std::sqrt(op.W(i));
    std::vector<double> ab = op.band_storage();
    for (std::size_t i = 0; i < P; ++i) {
        for (std::size_t d = 0; d < ld && i + d < P; ++d) ab[d + i * ld] *= inv_sqrt_w[i] * inv_sqrt_w[i + d];
    }
    const std::vector<double> scaled = ab; // dsbevx overwrites its input

    std::vector<double> shifts(P);
    std::vector<lapack_int> ifail(P);
    lapack_int found = 0;
    double unused = 0.0;
    lapack_int info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'I', 'L', n, kd, ab.data(), static_cast<lapack_int>(ld),
                                     &unused, 1, 0.0, 0.0, 1, static_cast<lapack_int>(count),
                                     2.0 * LAPACKE_dlamch('S'), &found, shifts.data(), &unused, 1, ifail.data());
    if (info != 0 || found != static_cast<lapack_int>(count)) {
        throw EigenFailure("banded eigenvalue bisection failed (info=" + std::to_string(info) + ")");
    }

    // general band storage of B - sigma I for the LU factorization: kl = ku = kd
    const lapack_int ldg = 3 * kd + 1;
    std::vector<double> lu(static_cast<std::size_t>(ldg) * P);
    std::vector<lapack_int> pivots(P);
    Eigen::MatrixXd vecs(n, static_cast<Eigen::Index>(count));
    Spectrum sp;
    sp.lambda.resize(count);

    for (std::size_t m = 0; m < count; ++m) {
        double sigma = shifts[m];
        for (int attempt = 0;; ++attempt) {
            std::fill(lu.begin(), lu.end(), 0.0);
            for (std::size_t c = 0; c < P; ++c) {
                for (std::size_t d = 0; d < ld && c + d < P; ++d) {
                    const double b = scaled[d + c * ld] - (d == 0 ? sigma : 0.0);
                    // entry (c+d, c) and its mirror (c, c+d)
                    lu[static_cast<std::size_t>(2 * kd) + d + c * static_cast<std::size_t>(ldg)] = b;
                    lu[static_cast<std::size_t>(2 * kd) - d + (c + d) * static_cast<std::size_t>(ldg)] = b;
                }
            }
            info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kd, kd, lu.data(), ldg, pivots.data());
            if (info == 0) break;
            if (info < 0 || attempt > 4) throw EigenFailure("inverse iteration factorization failed");
            sigma += 1e-12 * std::max(1.0, std::abs(sigma));
        }

        Eigen::VectorXd x(n);
        for (std::size_t i = 0; i < P; ++i) {
            // fixed pseudo-random start, so results are reproducible
            x[static_cast<Eigen::Index>(i)] = static_cast<double>((i * 7919 + m * 104729 + 17) % 1009) / 1009.0 - 0.5;
        }
        for (int it = 0; it < 3; ++it) {
            info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kd, kd, 1, lu.data(), ldg, pivots.data(), x.data(), n);
            if (info != 0) throw EigenFailure("inverse iteration solve failed");
            for (int pass = 0; pass < 2; ++pass) {
                x /= x.norm();
                for (std::size_t k = 0; k < m; ++k) {
                    const auto col = vecs.col(static_cast<Eigen::Index>(k));
                    x -= col.dot(x) * col;
                }
            }
            x /= x.norm();
        }
        vecs.col(static_cast<Eigen::Index>(m)) = x;

        Eigen::VectorXd y(n);
        for (std::size_t i = 0; i < P; ++i) y[static_cast<Eigen::Index>(i)] = x[static_cast<Eigen::Index>(i)] * inv_sqrt_w[i];
        double mass = 0.0;
        for (std::size_t i = 0; i < P; ++i) mass += op.W(i) * y[static_cast<Eigen::Index>(i)] * y[static_cast<Eigen::Index>(i)];
        sp.lambda[m] = op.energy(y) / mass;
        if (!(sp.lambda[m] > 0.0)) throw EigenFailure("nonpositive eigenvalue " + expr::format_double(sp.lambda[m]));
    }

    sp.Y = std::move(vecs);
    for (std::size_t i = 0; i < P; ++i) sp.Y.row(static_cast<Eigen::Index>(i)) *= inv_sqrt_w[i];
    finish_spectrum(sp, op);
    return sp;
}

Kernel green_kernel(const DiscreteOperator& op, const Grid& grid) {
    const std::size_t P = op.size();
    if (grid.size() != P) throw std::invalid_argument("grid does not match operator");
    const int kd = op.bandwidth();
    const auto n = static_cast<lapack_int>(P);
    std::vector<double> ab = op.band_storage();
    lapack_int info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', n, kd, ab.data(), kd + 1);
    if (info != 0) throw EigenFailure("operator matrix is singular (Cholesky info=" + std::to_string(info) + ")");

    Kernel kernel;
    kernel.G = Eigen::MatrixXd::Identity(n, n);
    info = LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'L', n, kd, n, ab.data(), kd + 1, kernel.G.data(), n);
    if (info != 0) throw EigenFailure("banded solve failed (info=" + std::to_string(info) + ")");
    kernel.G = 0.5 * (kernel.G + kernel.G.transpose()).eval();

    Eigen::VectorXd inv_sqrt_k(n);
    for (std::size_t i = 0; i < P; ++i) inv_sqrt_k[static_cast<Eigen::Index>(i)] = 1.0 / std::sqrt(op.K()[i]);
    kernel.Gbar = inv_sqrt_k.asDiagonal() * kernel.G * inv_sqrt_k.asDiagonal();
    kernel.Gbar = 0.5 * (kernel.Gbar + kernel.Gbar.transpose()).eval();
    return kernel;
}

Spectrum nystrom_eigs(const Kernel& kernel, const DiscreteOperator& op, const Grid& grid, std::size_t count) {
    const std::size_t P = op.size();
    if (grid.size() != P || static_cast<std::size_t>(kernel.Gbar.rows()) != P) {
        throw std::invalid_argument("kernel, operator and grid sizes differ");
    }
    check_count(count, P);
    const auto n = static_cast<lapack_int>(P);

    Eigen::VectorXd sqrt_w(n);
    for (std::size_t i = 0; i < P; ++i) sqrt_w[static_cast<Eigen::Index>(i)] = std::sqrt(grid.w(i));
    // diag(sqrt w) Gbar diag(sqrt w) is symmetric with the same eigenvalues as Gbar diag(w)
    Eigen::MatrixXd S = sqrt_w.asDiagonal() * kernel.Gbar * sqrt_w.asDiagonal();

    std::vector<double> mu(P);
    Eigen::MatrixXd z(n, static_cast<Eigen::Index>(count));
    std::vector<lapack_int> support(2 * P);
    lapack_int found = 0;
    const lapack_int info =
        LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, S.data(), n, 0.0, 0.0,
                       n - static_cast<lapack_int>(count) + 1, n, 2.0 * LAPACKE_dlamch('S'), &found, mu.data(),
                       z.data(), n, support.data());
    if (info != 0 || found != static_cast<lapack_int>(count)) {
        throw EigenFailure("dense eigensolver failed (info=" + std::to_string(info) + ")");
    }

    Spectrum sp;
    sp.Y.resize(n, static_cast<Eigen::Index>(count));
    // dsyevr returns ascending mu; the largest mu is the smallest lambda
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t src = count - 1 - k;
        if (!(mu[src] > 0.0)) throw EigenFailure("kernel eigenvalue is not positive");
        sp.lambda.push_back(1.0 / mu[src]);
        for (std::size_t i = 0; i < P; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            sp.Y(r, static_cast<Eigen::Index>(k)) =
                z(r, static_cast<Eigen::Index>(src)) / sqrt_w[r] * std::sqrt(op.K()[i]);
        }
    }
    finish_spectrum(sp, op);
    return sp;
}

double mercer_check(const Spectrum& spectrum, const Kernel& kernel, const DiscreteOperator& op, std::size_t N) {
    const auto P = static_cast<Eigen::Index>(op.size());
    if (kernel.Gbar.rows() != P || spectrum.Y.rows() != P) throw std::invalid_argument("spectrum and kernel sizes differ");
    const auto use = static_cast<Eigen::Index>(std::min(N, spectrum.count()));
    if (use == 0) return kernel.Gbar.cwiseAbs().maxCoeff();
    Eigen::MatrixXd ybar(P, use);
    for (Eigen::Index n = 0; n < use; ++n) {
        for (Eigen::Index i = 0; i < P; ++i) {
            ybar(i, n) = spectrum.Y(i, n) / std::sqrt(op.K()[static_cast<std::size_t>(i)]);
        }
    }
    Eigen::VectorXd inv_lambda(use);
    for (Eigen::Index n = 0; n < use; ++n) inv_lambda[n] = 1.0 / spectrum.lambda[static_cast<std::size_t>(n)];
    Eigen::MatrixXd partial = ybar * inv_lambda.asDiagonal() * ybar.transpose();
    return (kernel.Gbar - partial).cwiseAbs().maxCoeff();
}

std::vector<double> kernel_row_norms(const Kernel& kernel, const DiscreteOperator& op) {
    const std::size_t P = op.size();
    std::vector<double> out(P, 0.0);
    for (std::size_t i = 0; i < P; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < P; ++j) {
            const double g = kernel.G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            acc += op.weights()[j] * g * g / op.K()[j];
        }
        out[i] = acc;
    }
    return out;
}

double bessel_kernel_violation(const Spectrum& spectrum, const Kernel& kernel, const DiscreteOperator& op,
                               double slack) {
    const std::vector<double> bound = kernel_row_norms(kernel, op);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < op.size(); ++i) {
        double partial = 0.0;
        for (std::size_t n = 0; n < spectrum.count(); ++n) {
            const double t = spectrum.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) / spectrum.lambda[n];
            partial += t * t;
            worst = std::max(worst, partial - bound[i] - slack);
        }
    }
    return worst;
}

std::string eigenvalues_csv(const Spectrum& spectrum) {
    std::ostringstream out;
    out << "n,lambda\n";
    for (std::size_t n = 0; n < spectrum.count(); ++n) {
        out << n + 1 << ',' << expr::format_double(spectrum.lambda[n]) << '\n';
    }
    return out.str();
}

std::string eigenfunctions_csv(const Spectrum& spectrum, const Grid& grid) {
    std::ostringstream out;
    out << 'y';
    for (std::size_t n = 0; n < spectrum.count(); ++n) out << ",Y_" << n + 1;
    out << '\n';
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out << expr::format_double(grid.y(i));
        for (std::size_t n = 0; n < spectrum.count(); ++n) {
            out << ',' << expr::format_double(spectrum.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)));
        }
        out << '\n';
    }
    return out.str();
}

} // namespace degfrac::spectral
