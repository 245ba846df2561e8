#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lq/problem.hpp"
#include "lq/prox.hpp"
#include "lq/solver.hpp"

namespace lq {

// Optimality conditions at a point x with support I:
//   (a) |x_i| >= eta on I,
//   (b) A_i^T(Ax-y) + lambda q sgn(x_i)|x_i|^{q-1} = 0 on I,
//   (c) |A_i^T(Ax-y)| <= tau/mu off I.

struct StationarityTolerances {
    double tol_a = 0.0;
    double tol_b = 0.0;
    double tol_c = 0.0;
};

inline StationarityTolerances default_stationarity_tolerances(const Problem& problem,
                                                              const ProxParams& params,
                                                              double mu) {
    StationarityTolerances t;
    t.tol_a = 1e-9 * params.eta;
    t.tol_b = 1e-6 * (1.0 + problem.reg / mu);
    t.tol_c = 1e-9 * params.tau / mu;
    return t;
}

struct StationarityReport {
    std::vector<Index> support;
    double min_support_magnitude = std::numeric_limits<double>::infinity();
    bool cond_a_ok = true;
    double cond_a_margin = std::numeric_limits<double>::infinity();  // min |x_i| - eta on I
    double cond_b_residual = 0.0;  // worst on-support gradient-equation residual
    double cond_c_margin = std::numeric_limits<double>::infinity();  // tau/mu - worst |A_i^T r| off I
    bool is_stationary = false;
    StationarityTolerances tolerances;
};

inline StationarityReport check_stationarity(
    const Vector& x, const Problem& problem, const ProxParams& params, double mu,
    const std::optional<StationarityTolerances>& tolerances = std::nullopt) {
    if (x.size() != problem.cols())
        throw std::invalid_argument("check_stationarity: x length must match A");
    if (!x.allFinite()) throw std::invalid_argument("check_stationarity: x must be finite");
    if (!(mu > 0.0)) throw std::invalid_argument("check_stationarity: mu must be positive");

    StationarityReport rep;
    rep.tolerances = tolerances.value_or(default_stationarity_tolerances(problem, params, mu));
    const Vector r = problem.A * x - problem.y;
    const Vector g = problem.A.transpose() * r;

    double worst_off = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        if (x[i] != 0.0) {
            rep.support.push_back(i);
            const double mag = std::abs(x[i]);
            rep.min_support_magnitude = std::min(rep.min_support_magnitude, mag);
            const double grad_eq = g[i] + problem.reg * problem.q *
                                              ((x[i] > 0.0) ? 1.0 : -1.0) *
                                              std::pow(mag, problem.q - 1.0);
            rep.cond_b_residual = std::max(rep.cond_b_residual, std::abs(grad_eq));
        } else {
            worst_off = std::max(worst_off, std::abs(g[i]));
        }
    }
    rep.cond_a_margin = rep.min_support_magnitude - params.eta;
    rep.cond_a_ok = rep.cond_a_margin >= -rep.tolerances.tol_a;
    rep.cond_c_margin = params.tau / mu - worst_off;
    rep.is_stationary = rep.cond_a_ok && rep.cond_b_residual <= rep.tolerances.tol_b &&
                        rep.cond_c_margin >= -rep.tolerances.tol_c;
    return rep;
}

// Local-minimizer certificate: sigma_min(A_I^T A_I) > 0 and
// lambda < sigma_min * |e|^{2-q} / (q(1-q)) with e = min_{i in I} |x_i|.
struct LocalMinCertificate {
    double sigma_min = std::numeric_limits<double>::infinity();
    double min_magnitude = std::numeric_limits<double>::infinity();  // e
    double lambda_bound = std::numeric_limits<double>::infinity();
    Index k = 0;
    bool holds = false;
};

namespace detail {

inline double smallest_eigenvalue(const Matrix& gram) {
    const Index k = gram.rows();
    if (k <= 512) {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("certify_local_min: eigensolver failed");
        return solver.eigenvalues().minCoeff();
    }
    // Inverse power iteration for large supports.
    Eigen::LDLT<Matrix> factor(gram);
    if (factor.info() != Eigen::Success) return 0.0;
    Vector v = Vector::Ones(k);
    v /= v.norm();
    double est = v.dot(gram * v);
    for (int it = 0; it < 500; ++it) {
        Vector w = factor.solve(v);
        const double wnorm = w.norm();
        if (!(wnorm > 0.0) || !w.allFinite()) return 0.0;
        v = w / wnorm;
        const double next = v.dot(gram * v);
        if (std::abs(next - est) <= 1e-10 * std::max(std::abs(next), 1e-300)) return next;
        est = next;
    }
    return est;
}

}  // namespace detail

inline LocalMinCertificate certify_local_min(const Vector& x, const Problem& problem) {
    if (x.size() != problem.cols())
        throw std::invalid_argument("certify_local_min: x length must match A");
    LocalMinCertificate cert;
    std::vector<Index> support;
    for (Index i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) support.push_back(i);
    cert.k = static_cast<Index>(support.size());
    if (support.empty()) {
        cert.holds = true;  // the penalty dominates near 0; conditions are vacuous
        return cert;
    }
    Matrix basis(problem.rows(), cert.k);
    for (Index j = 0; j < cert.k; ++j) basis.col(j) = problem.A.col(support[static_cast<std::size_t>(j)]);
    const Matrix gram = basis.transpose() * basis;
    cert.sigma_min = detail::smallest_eigenvalue(gram);
    cert.min_magnitude = std::numeric_limits<double>::infinity();
    for (Index idx : support) cert.min_magnitude = std::min(cert.min_magnitude, std::abs(x[idx]));
    cert.lambda_bound = cert.sigma_min * std::pow(cert.min_magnitude, 2.0 - problem.q) /
                        (problem.q * (1.0 - problem.q));
    cert.holds = cert.sigma_min > 0.0 && problem.reg > 0.0 && problem.reg < cert.lambda_bound;
    return cert;
}

// Earliest cycle after which the end-of-cycle sign pattern never changes
// through the end of the run; absent when the pattern is still moving at the
// final recorded cycle (or fewer than two cycles were recorded).
inline std::optional<long> detect_support_stabilization(
    const std::vector<std::vector<std::int8_t>>& sign_history) {
    const long count = static_cast<long>(sign_history.size());
    if (count < 2) return std::nullopt;
    const auto& last = sign_history[static_cast<std::size_t>(count - 1)];
    long first_stable = 0;
    for (long c = count - 2; c >= 0; --c) {
        if (sign_history[static_cast<std::size_t>(c)] != last) {
            first_stable = c + 1;
            break;
        }
    }
    if (first_stable == count - 1) return std::nullopt;
    return first_stable;
}

inline std::optional<long> detect_support_stabilization(const std::vector<CycleRecord>& history) {
    std::vector<std::vector<std::int8_t>> signs;
    signs.reserve(history.size());
    for (const auto& rec : history) signs.push_back(rec.sign);
    return detect_support_stabilization(signs);
}

// Relative-error diagnostic on the stabilized support: with B = A_I and the
// merged sequence realized by end-of-cycle iterates, checks
// ||grad T(u^{c+1})||_2 <= b ||u^{c+1} - u^c||_2, b = (1/mu + K delta) sqrt(K).
struct RelativeErrorDiagnostic {
    Index k = 0;
    double delta = 0.0;    // max |B_i^T B_j| over the support
    double a_const = 0.0;  // (1/mu - L_max)/2
    double b_const = 0.0;
    double max_violation = -std::numeric_limits<double>::infinity();
    long checked = 0;
    long skipped = 0;  // pairs with step below 1e-14 (ratio undefined)
};

inline RelativeErrorDiagnostic relative_error_diagnostic(const std::vector<CycleRecord>& history,
                                                         const Problem& problem, long stab_index,
                                                         double mu) {
    if (history.empty()) throw std::invalid_argument("relative_error_diagnostic: empty history");
    if (stab_index < 0 || stab_index >= static_cast<long>(history.size()))
        throw std::invalid_argument("relative_error_diagnostic: stabilization index out of range");
    if (!(mu > 0.0)) throw std::invalid_argument("relative_error_diagnostic: mu must be positive");

    const auto& stable_sign = history[static_cast<std::size_t>(stab_index)].sign;
    for (std::size_t c = static_cast<std::size_t>(stab_index); c < history.size(); ++c)
        if (history[c].sign != stable_sign)
            throw std::invalid_argument(
                "relative_error_diagnostic: support not stabilized from the given index");

    std::vector<Index> support;
    for (std::size_t i = 0; i < stable_sign.size(); ++i)
        if (stable_sign[i] != 0) support.push_back(static_cast<Index>(i));
    const Index k = static_cast<Index>(support.size());

    const ProxParams params = make_prox_params(problem.reg, mu, problem.q);
    for (std::size_t c = static_cast<std::size_t>(stab_index); c < history.size(); ++c)
        for (Index idx : support)
            if (std::abs(history[c].x[idx]) < params.eta - 1e-9)
                throw std::invalid_argument(
                    "relative_error_diagnostic: iterate violates the magnitude gap");

    RelativeErrorDiagnostic diag;
    diag.k = k;
    Matrix basis(problem.rows(), k);
    for (Index j = 0; j < k; ++j) basis.col(j) = problem.A.col(support[static_cast<std::size_t>(j)]);
    for (Index a = 0; a < k; ++a)
        for (Index b = a; b < k; ++b)
            diag.delta = std::max(diag.delta, std::abs(basis.col(a).dot(basis.col(b))));
    double l_max = 0.0;
    for (Index j = 0; j < problem.cols(); ++j)
        l_max = std::max(l_max, problem.A.col(j).squaredNorm());
    diag.a_const = 0.5 * (1.0 / mu - l_max);
    diag.b_const = (1.0 / mu + static_cast<double>(k) * diag.delta) *
                   std::sqrt(static_cast<double>(k));

    const auto restrict_to_support = [&](const Vector& x) {
        Vector u(k);
        for (Index j = 0; j < k; ++j) u[j] = x[support[static_cast<std::size_t>(j)]];
        return u;
    };
    for (std::size_t c = static_cast<std::size_t>(stab_index); c + 1 < history.size(); ++c) {
        const Vector u_prev = restrict_to_support(history[c].x);
        const Vector u_next = restrict_to_support(history[c + 1].x);
        const double step = (u_next - u_prev).norm();
        if (step < 1e-14) {
            ++diag.skipped;
            continue;
        }
        Vector grad = basis.transpose() * (basis * u_next - problem.y);
        for (Index j = 0; j < k; ++j)
            grad[j] += problem.reg * problem.q * ((u_next[j] > 0.0) ? 1.0 : -1.0) *
                       std::pow(std::abs(u_next[j]), problem.q - 1.0);
        diag.max_violation = std::max(diag.max_violation, grad.norm() - diag.b_const * step);
        ++diag.checked;
    }
    return diag;
}

}  // namespace lq
