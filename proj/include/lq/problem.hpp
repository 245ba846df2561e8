#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lq/rng.hpp"

namespace lq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Least-squares data with the lq penalty parameters attached:
// minimize 0.5*||A x - y||^2 + reg * sum_i |x_i|^q.
struct Problem {
    Matrix A;          // m x n measurement matrix
    Vector y;          // length m
    double reg = 0.0;  // lambda
    double q = 0.5;

    Index rows() const { return A.rows(); }
    Index cols() const { return A.cols(); }
};

inline void validate(const Problem& problem) {
    if (problem.A.rows() < 1 || problem.A.cols() < 1)
        throw std::invalid_argument("problem: A must be nonempty");
    if (problem.y.size() != problem.A.rows())
        throw std::invalid_argument("problem: y length must match the row count of A");
    if (!problem.A.allFinite() || !problem.y.allFinite())
        throw std::invalid_argument("problem: A and y must be finite");
    if (!(problem.reg >= 0.0) || !std::isfinite(problem.reg))
        throw std::invalid_argument("problem: reg must be finite and nonnegative");
    if (!(problem.q > 0.0 && problem.q < 1.0))
        throw std::invalid_argument("problem: q must lie in (0, 1)");
}

struct GroundTruth {
    Vector x_star;               // planted signal, length n
    std::vector<Index> support;  // sorted indices of its nonzeros
    double snr_db = 0.0;         // realized noise level
};

struct ColumnStats {
    Vector col_sq_norms;          // ||A_i||_2^2 per column
    double l_max = 0.0;           // max_i ||A_i||_2^2
    double spec_norm_sq = 0.0;    // power-iteration estimate of ||A||_2^2
    double gram_max_abs = 0.0;    // max_{i,j} |A_i^T A_j| over the chosen columns
    bool gram_computed = false;   // false when skipped (no subset and n > 2000)
    int power_iterations = 0;
};

inline void normalize_columns(Matrix& A) {
    for (Index j = 0; j < A.cols(); ++j) {
        const double norm = A.col(j).norm();
        if (norm > 0.0 && std::abs(norm - 1.0) > 1e-12) A.col(j) /= norm;
    }
}

// Synthetic compressed-sensing instance: A with i.i.d. N(0, 1/m) entries
// (optionally column-normalized), a k-sparse standard-Gaussian signal, and
// y = A x* + eps with eps rescaled to hit snr_db exactly. snr_db = +inf means
// a noiseless observation. Deterministic per seed.
inline std::pair<Problem, GroundTruth> generate_instance(Index m, Index n, Index k, double snr_db,
                                                         bool normalize, std::uint64_t seed) {
    if (m < 1 || n < 1) throw std::invalid_argument("generate_instance: m and n must be positive");
    if (k < 1 || k > n) throw std::invalid_argument("generate_instance: need 1 <= k <= n");
    Rng rng(seed);

    Problem problem;
    problem.A.resize(m, n);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(m));
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) problem.A(i, j) = sigma * rng.gaussian();
    if (normalize) normalize_columns(problem.A);

    GroundTruth truth;
    truth.snr_db = snr_db;
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index t = 0; t < k; ++t) {
        const Index j = t + static_cast<Index>(rng.below(static_cast<std::int64_t>(n - t)));
        std::swap(perm[static_cast<std::size_t>(t)], perm[static_cast<std::size_t>(j)]);
    }
    truth.support.assign(perm.begin(), perm.begin() + k);
    std::sort(truth.support.begin(), truth.support.end());
    truth.x_star = Vector::Zero(n);
    for (Index idx : truth.support) truth.x_star[idx] = rng.gaussian();

    const Vector clean = problem.A * truth.x_star;
    problem.y = clean;
    if (std::isfinite(snr_db)) {
        Vector noise(m);
        for (Index i = 0; i < m; ++i) noise[i] = rng.gaussian();
        const double noise_norm = noise.norm();
        const double target = clean.norm() * std::pow(10.0, -snr_db / 20.0);
        if (noise_norm > 0.0) problem.y += noise * (target / noise_norm);
    }
    return {std::move(problem), std::move(truth)};
}

// Column norms, L_max, a power-iteration estimate of ||A||_2^2, and the
// pairwise Gram bound delta = max |A_i^T A_j| (restricted to `subset` when
// given, over all pairs when n <= 2000, skipped otherwise).
inline ColumnStats column_stats(const Matrix& A,
                                const std::optional<std::vector<Index>>& subset = std::nullopt) {
    if (!A.allFinite()) throw std::invalid_argument("column_stats: A must be finite");
    ColumnStats stats;
    const Index n = A.cols();
    stats.col_sq_norms.resize(n);
    for (Index j = 0; j < n; ++j) stats.col_sq_norms[j] = A.col(j).squaredNorm();
    stats.l_max = (n > 0) ? stats.col_sq_norms.maxCoeff() : 0.0;

    // Power iteration on A^T A; the estimate v^T A^T A v is monotone enough to
    // stop on a relative change of 1e-8.
    Vector v(n);
    for (Index j = 0; j < n; ++j) v[j] = 1.0 + 1e-3 * static_cast<double>(j % 17);
    v /= v.norm();
    double est = (A * v).squaredNorm();
    bool converged = false;
    constexpr int kMaxPowerIters = 10000;
    for (int it = 1; it <= kMaxPowerIters; ++it) {
        Vector w = A.transpose() * (A * v);
        const double wnorm = w.norm();
        if (wnorm == 0.0) {  // A annihilates v; the estimate is already exact
            est = 0.0;
            converged = true;
            stats.power_iterations = it;
            break;
        }
        v = w / wnorm;
        const double next = (A * v).squaredNorm();
        const bool done = std::abs(next - est) <= 1e-8 * std::max(next, 1e-300);
        est = next;
        stats.power_iterations = it;
        if (done) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw std::runtime_error("column_stats: power iteration did not converge in 10000 steps");
    // The spectral norm dominates every column norm; keep the estimate on the
    // admissible side of that bound.
    stats.spec_norm_sq = std::max(est, stats.l_max);

    const auto gram_over = [&](const std::vector<Index>& cols) {
        double worst = 0.0;
        for (std::size_t a = 0; a < cols.size(); ++a)
            for (std::size_t b = a; b < cols.size(); ++b)
                worst = std::max(worst, std::abs(A.col(cols[a]).dot(A.col(cols[b]))));
        return worst;
    };
    if (subset.has_value()) {
        for (Index idx : *subset)
            if (idx < 0 || idx >= n)
                throw std::invalid_argument("column_stats: subset index out of range");
        stats.gram_max_abs = gram_over(*subset);
        stats.gram_computed = true;
    } else if (n <= 2000) {
        const Matrix gram = A.transpose() * A;
        stats.gram_max_abs = gram.cwiseAbs().maxCoeff();
        stats.gram_computed = true;
    } else {
        stats.gram_max_abs = std::numeric_limits<double>::quiet_NaN();
        stats.gram_computed = false;
    }
    return stats;
}

}  // namespace lq
