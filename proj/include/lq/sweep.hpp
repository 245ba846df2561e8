#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "lq/problem.hpp"
#include "lq/rng.hpp"
#include "lq/solver.hpp"

namespace lq {

// Stepsize/q sweep over fresh synthetic instances, one row per
// (q, mu_frac, trial). mu is specified as a fraction of 1/L_max so the grid
// stays meaningful on non-normalized instances.
struct SweepConfig {
    Index m = 200;
    Index n = 400;
    Index k = 20;
    double snr_db = 30.0;
    double lambda = 0.009;
    std::vector<double> q_list{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> mu_fracs{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
    double tol = 1e-2;
    long max_iter = 160000;
    int trials = 10;
    std::uint64_t seed = 20240915;
    bool normalize = true;
    int threads = 1;
    bool allow_unsafe = false;  // permit mu_frac = 1 (the lqCD reference regime)
};

struct SweepRecord {
    double q = 0.0;
    double mu_frac = 0.0;
    int trial = 0;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    long updates = 0;
    long cycles = 0;
    double wall_time_s = 0.0;
    StopReason stop_reason = StopReason::max_iter;
    double support_f1 = 0.0;
    bool failed = false;
    std::string error;
};

inline void validate(const SweepConfig& config) {
    if (config.m < 1 || config.n < 1 || config.k < 1 || config.k > config.n)
        throw std::invalid_argument("sweep: bad instance shape");
    if (config.q_list.empty() || config.mu_fracs.empty())
        throw std::invalid_argument("sweep: empty q or mu grid");
    for (double q : config.q_list)
        if (q < 0.01 || q > 0.99)
            throw std::invalid_argument("sweep: q outside [0.01, 0.99]");
    for (double f : config.mu_fracs) {
        const double limit = config.allow_unsafe ? 1.0 : 1.0 - 1e-9;
        if (!(f > 0.0 && f <= limit))
            throw std::invalid_argument("sweep: mu_frac must lie strictly inside (0, 1)");
    }
    if (config.trials < 1) throw std::invalid_argument("sweep: trials must be positive");
    if (!(config.tol > 0.0)) throw std::invalid_argument("sweep: tol must be positive");
    if (config.max_iter < 1) throw std::invalid_argument("sweep: max_iter must be positive");
}

// Deterministic per-task seed; rows do not depend on worker scheduling.
inline std::uint64_t sweep_trial_seed(const SweepConfig& config, std::size_t qi, std::size_t mi,
                                      int trial) {
    return mix_seed(config.seed, qi, mi, static_cast<std::uint64_t>(trial));
}

inline std::vector<SweepRecord> run_sweep(const SweepConfig& config) {
    validate(config);
    const std::size_t cells = config.q_list.size() * config.mu_fracs.size();
    const std::size_t total = cells * static_cast<std::size_t>(config.trials);
    std::vector<SweepRecord> records(total);

    const auto run_task = [&](std::size_t task) {
        const std::size_t cell = task / static_cast<std::size_t>(config.trials);
        const int trial = static_cast<int>(task % static_cast<std::size_t>(config.trials));
        const std::size_t qi = cell / config.mu_fracs.size();
        const std::size_t mi = cell % config.mu_fracs.size();
        SweepRecord& rec = records[task];
        rec.q = config.q_list[qi];
        rec.mu_frac = config.mu_fracs[mi];
        rec.trial = trial;
        try {
            auto [problem, truth] =
                generate_instance(config.m, config.n, config.k, config.snr_db, config.normalize,
                                  sweep_trial_seed(config, qi, mi, trial));
            problem.reg = config.lambda;
            problem.q = rec.q;
            double l_max = 0.0;
            for (Index j = 0; j < problem.cols(); ++j)
                l_max = std::max(l_max, problem.A.col(j).squaredNorm());
            SolverOptions opt;
            opt.step = rec.mu_frac / l_max;
            opt.stop_rule = StopRule::rmse;
            opt.tol = config.tol;
            opt.max_iter = config.max_iter;
            opt.allow_unsafe_step = config.allow_unsafe;
            const SolveReport report = ccd_solve(problem, opt, &truth);
            rec.rmse = report.rmse;
            rec.updates = report.iterations;
            rec.cycles = report.cycles;
            rec.wall_time_s = report.wall_time_s;
            rec.stop_reason = report.stop_reason;
            rec.support_f1 = detail::support_f1(report.support, truth.support);
        } catch (const std::exception& err) {
            rec.failed = true;
            rec.error = err.what();
        }
    };

    const int workers = std::max(1, config.threads);
    if (workers == 1) {
        for (std::size_t task = 0; task < total; ++task) run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t task = next.fetch_add(1);
                    if (task >= total) return;
                    run_task(task);
                }
            });
        for (auto& t : pool) t.join();
    }
    return records;
}

namespace sweep_detail {

inline std::string fmt(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return (values.size() % 2 == 1) ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace sweep_detail

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
    out << "q,mu_frac,trial,rmse,updates,cycles,wall_time_s,stop_reason,support_f1\n";
    for (const auto& rec : records) {
        out << sweep_detail::fmt(rec.q) << ',' << sweep_detail::fmt(rec.mu_frac) << ','
            << rec.trial << ',';
        if (rec.failed) {
            std::string msg = rec.error;
            for (auto& ch : msg)
                if (ch == ',' || ch == '\n') ch = ';';
            out << "nan,0,0,0,error: " << msg << ",0\n";
            continue;
        }
        out << sweep_detail::fmt(rec.rmse) << ',' << rec.updates << ',' << rec.cycles << ','
            << sweep_detail::fmt(rec.wall_time_s) << ',' << to_string(rec.stop_reason) << ','
            << sweep_detail::fmt(rec.support_f1) << '\n';
    }
}

struct SweepCellSummary {
    double q = 0.0;
    double mu_frac = 0.0;
    int trials = 0;
    int reached_tol = 0;
    double median_rmse = 0.0;
    double median_cycles = 0.0;
    double median_wall_time_s = 0.0;
};

inline std::vector<SweepCellSummary> summarize_sweep(const SweepConfig& config,
                                                     const std::vector<SweepRecord>& records) {
    std::vector<SweepCellSummary> cells;
    for (std::size_t qi = 0; qi < config.q_list.size(); ++qi) {
        for (std::size_t mi = 0; mi < config.mu_fracs.size(); ++mi) {
            SweepCellSummary cell;
            cell.q = config.q_list[qi];
            cell.mu_frac = config.mu_fracs[mi];
            std::vector<double> rmse, cycles, wall;
            for (const auto& rec : records) {
                if (rec.q != cell.q || rec.mu_frac != cell.mu_frac || rec.failed) continue;
                ++cell.trials;
                if (rec.stop_reason == StopReason::tolerance_met) ++cell.reached_tol;
                rmse.push_back(rec.rmse);
                cycles.push_back(static_cast<double>(rec.cycles));
                wall.push_back(rec.wall_time_s);
            }
            cell.median_rmse = sweep_detail::median(std::move(rmse));
            cell.median_cycles = sweep_detail::median(std::move(cycles));
            cell.median_wall_time_s = sweep_detail::median(std::move(wall));
            cells.push_back(cell);
        }
    }
    return cells;
}

inline void print_sweep_summary(std::ostream& out, const std::vector<SweepCellSummary>& cells) {
    out << "q      mu_frac  reached  med_rmse    med_cycles  med_time_s\n";
    for (const auto& cell : cells) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-6.3g %-8.3g %3d/%-4d %-11.4g %-11.5g %-10.4g\n",
                      cell.q, cell.mu_frac, cell.reached_tol, cell.trials, cell.median_rmse,
                      cell.median_cycles, cell.median_wall_time_s);
        out << line;
    }
}

}  // namespace lq
