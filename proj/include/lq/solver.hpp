#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lq/problem.hpp"
#include "lq/prox.hpp"

namespace lq {

enum class StopRule { objective_decrease, step_norm, rmse };
enum class StopReason { tolerance_met, max_iter, stagnation };

inline const char* to_string(StopRule rule) {
    switch (rule) {
        case StopRule::objective_decrease: return "objective";
        case StopRule::step_norm: return "step-norm";
        case StopRule::rmse: return "rmse";
    }
    return "?";
}

inline const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::tolerance_met: return "tolerance_met";
        case StopReason::max_iter: return "max_iter";
        case StopReason::stagnation: return "stagnation";
    }
    return "?";
}

struct SolverOptions {
    double step = 0.0;  // mu; must satisfy 0 < mu < 1/L_max for CCD
    long max_iter = 160000;  // budget in coordinate updates
    StopRule stop_rule = StopRule::step_norm;
    double tol = 1e-8;
    Vector x0;  // empty = all zeros
    bool record_history = false;
    bool allow_unsafe_step = false;   // skip the mu guard (lqCD reference, mu = 1)
    bool stop_on_stagnation = false;  // report a frozen iterate instead of running out the budget
};

// Per coordinate update, kept when record_history is set.
struct UpdateRecord {
    double objective_after = 0.0;
    double step_sq = 0.0;       // (x_i^{n+1} - x_i^n)^2
    double decrease = 0.0;      // T(x^n) - T(x^{n+1})
    double opt_residual = 0.0;  // coordinate-optimality residual, 0 for zero updates
};

// End-of-cycle snapshot, kept when record_history is set.
struct CycleRecord {
    double objective = 0.0;
    double step_sq = 0.0;  // ||x^{n+N} - x^n||^2 over the cycle
    Vector x;
    std::vector<std::int8_t> sign;
};

struct SolveReport {
    Vector x_final;
    double objective_final = 0.0;
    long iterations = 0;  // coordinate updates
    long cycles = 0;      // completed full cycles
    StopReason stop_reason = StopReason::max_iter;
    std::vector<Index> support;
    std::vector<std::int8_t> sign_pattern;
    double wall_time_s = 0.0;
    double rmse = std::numeric_limits<double>::quiet_NaN();  // vs truth when provided
    std::optional<long> support_stable_since;                // cycle index, when attained
    long stagnated_at_cycle = -1;
    bool outside_theory = false;  // set by the mu = 1 lqCD reference

    // Solve context, for serialization and certificates.
    double mu = 0.0;
    double lambda = 0.0;
    double q = 0.0;
    double l_max = 0.0;
    double tol = 0.0;
    StopRule stop_rule = StopRule::step_norm;
    std::string algo = "ccd";

    std::vector<UpdateRecord> update_history;
    std::vector<CycleRecord> cycle_history;
};

struct SolverState {
    Vector x;
    Vector residual;  // A x - y, maintained incrementally
    long iter = 0;    // coordinate updates so far
    double mu = 0.0;
    double resid_sq = 0.0;  // ||residual||^2, maintained
    double penalty = 0.0;   // reg * sum_i |x_i|^q, maintained
    double last_step_sq = 0.0;
    std::optional<long> support_stable_since;

    // Caches and scratch for diagnostics.
    Vector col_sq_norms;
    double last_dot = 0.0;  // A_i^T residual before the last update
    double last_xi_old = 0.0;
    double last_xi_new = 0.0;
    Index last_coord = -1;

    double objective() const { return 0.5 * resid_sq + penalty; }
};

inline double objective(const Problem& problem, const Vector& x) {
    if (x.size() != problem.cols())
        throw std::invalid_argument("objective: x length must match the column count of A");
    double penalty = 0.0;
    if (problem.reg > 0.0)
        for (Index i = 0; i < x.size(); ++i)
            penalty += std::pow(std::abs(x[i]), problem.q);
    return 0.5 * (problem.A * x - problem.y).squaredNorm() + problem.reg * penalty;
}

// Cyclic index rule: 1-based coordinate for update counter n.
inline Index coordinate_index(long n, Index n_cols) {
    if (n_cols < 1) throw std::invalid_argument("coordinate_index: n_cols must be positive");
    const long r = (n + 1) % n_cols;
    return r == 0 ? n_cols : static_cast<Index>(r);
}

inline SolverState make_solver_state(const Problem& problem, const Vector& x0, double mu) {
    SolverState s;
    s.x = x0;
    s.mu = mu;
    s.residual = problem.A * s.x - problem.y;
    s.resid_sq = s.residual.squaredNorm();
    s.penalty = 0.0;
    if (problem.reg > 0.0)
        for (Index i = 0; i < s.x.size(); ++i)
            s.penalty += problem.reg * std::pow(std::abs(s.x[i]), problem.q);
    s.col_sq_norms.resize(problem.cols());
    for (Index j = 0; j < problem.cols(); ++j) s.col_sq_norms[j] = problem.A.col(j).squaredNorm();
    return s;
}

// Drift control: rebuild the incremental quantities from x.
inline void refresh_state(SolverState& s, const Problem& problem) {
    s.residual = problem.A * s.x - problem.y;
    s.resid_sq = s.residual.squaredNorm();
    s.penalty = 0.0;
    if (problem.reg > 0.0)
        for (Index i = 0; i < s.x.size(); ++i)
            s.penalty += problem.reg * std::pow(std::abs(s.x[i]), problem.q);
}

// One coordinate update: z_i = x_i - mu A_i^T(Ax - y), x_i <- T(z_i, x_i),
// with the residual and objective maintained in O(m).
inline void ccd_step(SolverState& s, const Problem& problem, const ProxParams& params, Index i) {
    const double dot = problem.A.col(i).dot(s.residual);
    const double zi = s.x[i] - s.mu * dot;
    const double xi_new = tie_break(zi, s.x[i], params);
    const double d = xi_new - s.x[i];
    s.last_dot = dot;
    s.last_xi_old = s.x[i];
    s.last_xi_new = xi_new;
    s.last_coord = i;
    s.last_step_sq = d * d;
    if (d != 0.0) {
        s.residual += d * problem.A.col(i);
        s.resid_sq += 2.0 * d * dot + d * d * s.col_sq_norms[i];
        if (problem.reg > 0.0)
            s.penalty += problem.reg * (std::pow(std::abs(xi_new), problem.q) -
                                        std::pow(std::abs(s.x[i]), problem.q));
        s.x[i] = xi_new;
    }
    s.iter += 1;
}

namespace detail {

inline std::int8_t sign8(double v) {
    return static_cast<std::int8_t>((v > 0.0) - (v < 0.0));
}

inline std::vector<std::int8_t> sign_pattern(const Vector& x) {
    std::vector<std::int8_t> s(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i) s[static_cast<std::size_t>(i)] = sign8(x[i]);
    return s;
}

inline std::vector<Index> support_of(const Vector& x) {
    std::vector<Index> out;
    for (Index i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) out.push_back(i);
    return out;
}

inline void validate_options(const Problem& problem, const SolverOptions& opt,
                             const GroundTruth* truth) {
    validate(problem);
    if (problem.q < 0.01 || problem.q > 0.99)
        throw std::invalid_argument("solver: q outside the supported range [0.01, 0.99]");
    if (!(opt.step > 0.0) || !std::isfinite(opt.step))
        throw std::invalid_argument("solver: step must be a finite positive value");
    if (opt.max_iter < 1) throw std::invalid_argument("solver: max_iter must be positive");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("solver: tol must be positive");
    if (opt.x0.size() != 0 && opt.x0.size() != problem.cols())
        throw std::invalid_argument("solver: x0 length must match the column count of A");
    if (opt.x0.size() != 0 && !opt.x0.allFinite())
        throw std::invalid_argument("solver: x0 must be finite");
    if (opt.stop_rule == StopRule::rmse) {
        if (truth == nullptr)
            throw std::invalid_argument("solver: rmse stop rule requires ground truth");
        if (truth->x_star.size() != problem.cols())
            throw std::invalid_argument("solver: ground-truth length must match A");
        if (truth->x_star.norm() == 0.0)
            throw std::invalid_argument("solver: rmse undefined for a zero ground truth");
    }
}

// P_I-style support/sign F-measure against a reference support.
inline double support_f1(const std::vector<Index>& found, const std::vector<Index>& expected) {
    if (found.empty() && expected.empty()) return 1.0;
    if (found.empty() || expected.empty()) return 0.0;
    std::size_t hits = 0;
    std::size_t a = 0, b = 0;
    while (a < found.size() && b < expected.size()) {
        if (found[a] == expected[b]) {
            ++hits;
            ++a;
            ++b;
        } else if (found[a] < expected[b]) {
            ++a;
        } else {
            ++b;
        }
    }
    const double precision = static_cast<double>(hits) / static_cast<double>(found.size());
    const double recall = static_cast<double>(hits) / static_cast<double>(expected.size());
    return (precision + recall > 0.0) ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace detail

// The cyclic coordinate descent loop. Stop rules are evaluated once per full
// cycle of N coordinate updates; max_iter caps coordinate updates.
inline SolveReport ccd_solve(const Problem& problem, const SolverOptions& opt,
                             const GroundTruth* truth = nullptr) {
    detail::validate_options(problem, opt, truth);
    const Index n = problem.cols();

    Vector x0 = (opt.x0.size() != 0) ? opt.x0 : Vector::Zero(n);
    SolverState state = make_solver_state(problem, x0, opt.step);
    const double l_max = state.col_sq_norms.maxCoeff();
    if (!opt.allow_unsafe_step && !(opt.step * l_max <= 1.0 - 1e-9))
        throw std::invalid_argument("solver: step " + std::to_string(opt.step) +
                                    " violates mu < 1/L_max = " + std::to_string(1.0 / l_max));
    if (!std::isfinite(state.objective()))
        throw std::runtime_error("solver: objective at x0 is not finite");

    const ProxParams params = make_prox_params(problem.reg, opt.step, problem.q);

    SolveReport report;
    report.mu = opt.step;
    report.lambda = problem.reg;
    report.q = problem.q;
    report.l_max = l_max;
    report.tol = opt.tol;
    report.stop_rule = opt.stop_rule;
    report.algo = "ccd";

    const auto t0 = std::chrono::steady_clock::now();
    long cycles = 0;
    long last_sign_change_cycle = -1;  // -1 = never changed
    int frozen_cycles = 0;
    bool done = false;
    const long refresh_every = 50;  // cycles between residual rebuilds

    while (!done) {
        const double objective_start = state.objective();
        const double x_start_norm = state.x.norm();
        double cycle_step_sq = 0.0;
        bool cycle_complete = true;
        for (Index j = 0; j < n; ++j) {
            if (state.iter >= opt.max_iter) {
                cycle_complete = false;
                break;
            }
            const Index i = coordinate_index(state.iter, n) - 1;
            const double objective_before = state.objective();
            ccd_step(state, problem, params, i);
            cycle_step_sq += state.last_step_sq;
            if (detail::sign8(state.last_xi_new) != detail::sign8(state.last_xi_old))
                last_sign_change_cycle = cycles;
            if (opt.record_history) {
                UpdateRecord rec;
                rec.objective_after = state.objective();
                rec.step_sq = state.last_step_sq;
                rec.decrease = objective_before - rec.objective_after;
                if (state.last_xi_new != 0.0) {
                    // Nonzero updates satisfy grad_i T(x^{n+1}) = (1/mu - A_i^T A_i)(x_i^n - x_i^{n+1}).
                    const double d = state.last_xi_new - state.last_xi_old;
                    const double grad_i =
                        (state.last_dot + d * state.col_sq_norms[i]) +
                        problem.reg * problem.q * detail::sign8(state.last_xi_new) *
                            std::pow(std::abs(state.last_xi_new), problem.q - 1.0);
                    const double rhs = (1.0 / opt.step - state.col_sq_norms[i]) * (-d);
                    rec.opt_residual = std::abs(grad_i - rhs);
                }
                report.update_history.push_back(rec);
            }
            if (!std::isfinite(state.objective()))
                throw std::runtime_error("solver: objective became non-finite at update " +
                                         std::to_string(state.iter));
        }
        if (!cycle_complete) {
            report.stop_reason = StopReason::max_iter;
            break;
        }
        ++cycles;
        if (cycles % refresh_every == 0) refresh_state(state, problem);
        if (opt.record_history) {
            CycleRecord rec;
            rec.objective = state.objective();
            rec.step_sq = cycle_step_sq;
            rec.x = state.x;
            rec.sign = detail::sign_pattern(state.x);
            report.cycle_history.push_back(std::move(rec));
        }

        bool fired = false;
        switch (opt.stop_rule) {
            case StopRule::step_norm:
                fired = std::sqrt(cycle_step_sq) <= opt.tol * (1.0 + x_start_norm);
                break;
            case StopRule::objective_decrease:
                fired = (objective_start - state.objective()) <= opt.tol * (1.0 + std::abs(objective_start));
                break;
            case StopRule::rmse:
                fired = (state.x - truth->x_star).norm() / truth->x_star.norm() <= opt.tol;
                break;
        }
        if (fired) {
            report.stop_reason = StopReason::tolerance_met;
            done = true;
            break;
        }
        if (state.iter >= opt.max_iter) {
            report.stop_reason = StopReason::max_iter;
            break;
        }

        frozen_cycles = (cycle_step_sq == 0.0) ? frozen_cycles + 1 : 0;
        if (frozen_cycles >= 2) {
            // The iterate is a fixed point of the cycle map; only the rmse rule
            // can still be unmet here, and it never will be.
            report.stagnated_at_cycle = cycles;
            if (opt.stop_on_stagnation) {
                report.stop_reason = StopReason::stagnation;
            } else {
                cycles = opt.max_iter / n;
                state.iter = opt.max_iter;
                report.stop_reason = StopReason::max_iter;
            }
            break;
        }
    }

    const auto t1 = std::chrono::steady_clock::now();
    report.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    report.iterations = state.iter;
    report.cycles = cycles;
    report.x_final = state.x;
    report.objective_final = objective(problem, state.x);
    report.support = detail::support_of(state.x);
    report.sign_pattern = detail::sign_pattern(state.x);
    if (last_sign_change_cycle < 0)
        state.support_stable_since = (cycles >= 2) ? std::optional<long>(0) : std::nullopt;
    else if (last_sign_change_cycle < cycles - 1)
        state.support_stable_since = last_sign_change_cycle;
    else
        state.support_stable_since = std::nullopt;
    report.support_stable_since = state.support_stable_since;
    if (truth != nullptr && truth->x_star.size() == n && truth->x_star.norm() > 0.0)
        report.rmse = (state.x - truth->x_star).norm() / truth->x_star.norm();
    return report;
}

// Jacobi-style operator G(x) = Prox(x - mu A^T(Ax - y)), applied element-wise
// with the previous x_i as the tie-break indicator.
inline Vector ijt_step(const Vector& x, const Problem& problem, const ProxParams& params,
                       double mu) {
    if (x.size() != problem.cols())
        throw std::invalid_argument("ijt_step: x length must match the column count of A");
    const Vector z = x - mu * (problem.A.transpose() * (problem.A * x - problem.y));
    Vector out(x.size());
    for (Index i = 0; i < x.size(); ++i) out[i] = tie_break(z[i], x[i], params);
    return out;
}

// Full-vector iterative jumping-thresholding baseline; admissible under the
// stricter bound mu < 1/||A||_2^2.
inline SolveReport ijt_solve(const Problem& problem, const SolverOptions& opt,
                             const GroundTruth* truth = nullptr) {
    detail::validate_options(problem, opt, truth);
    const Index n = problem.cols();
    const ColumnStats stats = column_stats(problem.A);
    if (!opt.allow_unsafe_step && !(opt.step * stats.spec_norm_sq <= 1.0 - 1e-9))
        throw std::invalid_argument("solver: step " + std::to_string(opt.step) +
                                    " violates mu < 1/||A||_2^2 = " +
                                    std::to_string(1.0 / stats.spec_norm_sq));
    const ProxParams params = make_prox_params(problem.reg, opt.step, problem.q);

    SolveReport report;
    report.mu = opt.step;
    report.lambda = problem.reg;
    report.q = problem.q;
    report.l_max = stats.l_max;
    report.tol = opt.tol;
    report.stop_rule = opt.stop_rule;
    report.algo = "ijt";

    Vector x = (opt.x0.size() != 0) ? opt.x0 : Vector::Zero(n);
    if (!std::isfinite(objective(problem, x)))
        throw std::runtime_error("solver: objective at x0 is not finite");

    const auto t0 = std::chrono::steady_clock::now();
    long steps = 0;
    long last_sign_change_step = -1;
    std::vector<std::int8_t> prev_sign = detail::sign_pattern(x);
    int frozen = 0;
    while (true) {
        if (steps * n >= opt.max_iter) {
            report.stop_reason = StopReason::max_iter;
            break;
        }
        const double objective_start = objective(problem, x);
        const double x_start_norm = x.norm();
        Vector next = ijt_step(x, problem, params, opt.step);
        const double step_sq = (next - x).squaredNorm();
        x = std::move(next);
        ++steps;
        std::vector<std::int8_t> sign = detail::sign_pattern(x);
        if (sign != prev_sign) last_sign_change_step = steps - 1;
        prev_sign = sign;
        const double objective_now = objective(problem, x);
        if (!std::isfinite(objective_now))
            throw std::runtime_error("solver: objective became non-finite at step " +
                                     std::to_string(steps));
        if (opt.record_history) {
            CycleRecord rec;
            rec.objective = objective_now;
            rec.step_sq = step_sq;
            rec.x = x;
            rec.sign = sign;
            report.cycle_history.push_back(std::move(rec));
        }
        bool fired = false;
        switch (opt.stop_rule) {
            case StopRule::step_norm:
                fired = std::sqrt(step_sq) <= opt.tol * (1.0 + x_start_norm);
                break;
            case StopRule::objective_decrease:
                fired = (objective_start - objective_now) <= opt.tol * (1.0 + std::abs(objective_start));
                break;
            case StopRule::rmse:
                fired = (x - truth->x_star).norm() / truth->x_star.norm() <= opt.tol;
                break;
        }
        if (fired) {
            report.stop_reason = StopReason::tolerance_met;
            break;
        }
        frozen = (step_sq == 0.0) ? frozen + 1 : 0;
        if (frozen >= 2) {
            report.stagnated_at_cycle = steps;
            if (opt.stop_on_stagnation) {
                report.stop_reason = StopReason::stagnation;
            } else {
                steps = opt.max_iter / n;
                report.stop_reason = StopReason::max_iter;
            }
            break;
        }
    }
    const auto t1 = std::chrono::steady_clock::now();
    report.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    report.cycles = steps;
    report.iterations = steps * n;
    report.x_final = x;
    report.objective_final = objective(problem, x);
    report.support = detail::support_of(x);
    report.sign_pattern = detail::sign_pattern(x);
    if (last_sign_change_step < 0)
        report.support_stable_since = (steps >= 2) ? std::optional<long>(0) : std::nullopt;
    else if (last_sign_change_step < steps - 1)
        report.support_stable_since = last_sign_change_step;
    if (truth != nullptr && truth->x_star.size() == n && truth->x_star.norm() > 0.0)
        report.rmse = (x - truth->x_star).norm() / truth->x_star.norm();
    return report;
}

// The mu = 1 special case on column-normalized instances. Outside the
// mu < 1/L_max convergence theory; the report says so.
inline SolveReport lq_cd_reference(const Problem& problem, const SolverOptions& opt,
                                   const GroundTruth* truth = nullptr) {
    for (Index j = 0; j < problem.cols(); ++j)
        if (std::abs(problem.A.col(j).norm() - 1.0) > 1e-9)
            throw std::invalid_argument("lq_cd_reference: columns must have unit norm");
    SolverOptions fixed = opt;
    fixed.step = 1.0;
    fixed.allow_unsafe_step = true;
    SolveReport report = ccd_solve(problem, fixed, truth);
    report.outside_theory = true;
    report.algo = "lqcd";
    return report;
}

}  // namespace lq
