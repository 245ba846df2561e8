#pragma once

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "lq/analysis.hpp"
#include "lq/io.hpp"
#include "lq/problem.hpp"
#include "lq/solver.hpp"
#include "lq/sweep.hpp"

namespace lq {

namespace cli_detail {

struct GenerateArgs {
    Index m = 200, n = 400, k = 20;
    double snr_db = 30.0;
    bool normalize = true;
    std::uint64_t seed = 42;
    std::string out;
    bool binary = false;
};

struct SolveArgs {
    std::string problem_dir;
    double lambda = 0.009;
    double q = 0.5;
    double mu_frac = 0.9;
    std::string stop_rule = "step-norm";
    double tol = 1e-8;
    long max_iter = 160000;
    std::string algo = "ccd";
    std::string x0 = "zero";
    bool certify = false;
    bool history = false;
    bool allow_unsafe = false;
    std::string out;
};

struct CheckArgs {
    std::string problem_dir;
    std::string x_file;
    std::string report_file;
    double lambda = 0.009;
    double q = 0.5;
    double mu_frac = 0.9;
    bool mu_frac_given = false;
};

inline StopRule parse_stop_rule(const std::string& name) {
    if (name == "step-norm") return StopRule::step_norm;
    if (name == "objective") return StopRule::objective_decrease;
    if (name == "rmse") return StopRule::rmse;
    throw std::invalid_argument("unknown stop rule: " + name);
}

inline int cmd_generate(const GenerateArgs& args) {
    auto [problem, truth] =
        generate_instance(args.m, args.n, args.k, args.snr_db, args.normalize, args.seed);
    std::map<std::string, std::string> meta{
        {"m", std::to_string(args.m)},
        {"n", std::to_string(args.n)},
        {"k", std::to_string(args.k)},
        {"seed", std::to_string(args.seed)},
        {"normalized", args.normalize ? "1" : "0"},
    };
    save_problem(args.out, problem, &truth, meta, args.binary);
    double l_max = 0.0;
    for (Index j = 0; j < problem.cols(); ++j)
        l_max = std::max(l_max, problem.A.col(j).squaredNorm());
    std::printf("generated %s: m=%lld n=%lld k=%lld snr_db=%g seed=%llu l_max=%.12g\n",
                args.out.c_str(), static_cast<long long>(args.m), static_cast<long long>(args.n),
                static_cast<long long>(args.k), args.snr_db,
                static_cast<unsigned long long>(args.seed), l_max);
    return 0;
}

inline int cmd_solve(const SolveArgs& args) {
    InstanceFiles files = load_problem(args.problem_dir);
    Problem& problem = files.problem;
    problem.reg = args.lambda;
    problem.q = args.q;

    SolverOptions opt;
    opt.stop_rule = parse_stop_rule(args.stop_rule);
    opt.tol = args.tol;
    opt.max_iter = args.max_iter;
    opt.record_history = args.history;
    opt.allow_unsafe_step = args.allow_unsafe;
    if (args.x0 != "zero") opt.x0 = load_vector(args.x0);

    const GroundTruth* truth = files.truth ? &*files.truth : nullptr;
    const ColumnStats stats = column_stats(problem.A);
    SolveReport report;
    if (args.algo == "ccd") {
        opt.step = args.mu_frac / stats.l_max;
        report = ccd_solve(problem, opt, truth);
    } else if (args.algo == "ijt") {
        // For the Jacobi baseline mu-frac scales its own bound 1/||A||_2^2.
        opt.step = args.mu_frac / stats.spec_norm_sq;
        report = ijt_solve(problem, opt, truth);
    } else if (args.algo == "lqcd") {
        report = lq_cd_reference(problem, opt, truth);
    } else {
        throw std::invalid_argument("unknown algorithm: " + args.algo);
    }

    std::printf("algo=%s stop=%s iterations=%ld cycles=%ld objective=%.12g support=%zu",
                report.algo.c_str(), to_string(report.stop_reason), report.iterations,
                report.cycles, report.objective_final, report.support.size());
    if (std::isfinite(report.rmse)) std::printf(" rmse=%.6g", report.rmse);
    std::printf(" wall_time_s=%.3g\n", report.wall_time_s);

    StationarityReport stationarity;
    LocalMinCertificate certificate;
    if (args.certify) {
        const ProxParams params = make_prox_params(problem.reg, report.mu, problem.q);
        stationarity = check_stationarity(report.x_final, problem, params, report.mu);
        certificate = certify_local_min(report.x_final, problem);
        std::printf(
            "stationary=%d cond_a_margin=%.6g cond_b_residual=%.6g cond_c_margin=%.6g\n",
            stationarity.is_stationary ? 1 : 0, stationarity.cond_a_margin,
            stationarity.cond_b_residual, stationarity.cond_c_margin);
        std::printf("local_min_holds=%d sigma_min=%.6g e=%.6g lambda_bound=%.6g\n",
                    certificate.holds ? 1 : 0, certificate.sigma_min, certificate.min_magnitude,
                    certificate.lambda_bound);
    }
    if (!args.out.empty())
        save_report(args.out, report, args.certify ? &stationarity : nullptr,
                    args.certify ? &certificate : nullptr);
    return 0;
}

inline int cmd_sweep(const SweepConfig& config, const std::string& out_path) {
    const std::vector<SweepRecord> records = run_sweep(config);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
        write_sweep_csv(out, records);
    } else {
        write_sweep_csv(std::cout, records);
    }
    print_sweep_summary(std::cout, summarize_sweep(config, records));
    long failures = 0;
    for (const auto& rec : records)
        if (rec.failed) ++failures;
    if (failures > 0) std::fprintf(stderr, "%ld of %zu runs failed\n", failures, records.size());
    return 0;
}

inline int cmd_check(const CheckArgs& args) {
    InstanceFiles files = load_problem(args.problem_dir);
    Problem& problem = files.problem;
    problem.reg = args.lambda;
    problem.q = args.q;
    Vector x;
    double mu_from_report = 0.0;
    if (!args.report_file.empty()) {
        const SolveReport report = load_report(args.report_file);
        x = report.x_final;
        if (report.lambda > 0.0) problem.reg = report.lambda;
        if (report.q > 0.0) problem.q = report.q;
        mu_from_report = report.mu;
    } else {
        x = load_vector(args.x_file);
    }
    if (x.size() != problem.cols())
        throw std::runtime_error("dimension mismatch: solution has length " +
                                 std::to_string(x.size()) + " but A has " +
                                 std::to_string(problem.cols()) + " columns");
    double l_max = 0.0;
    for (Index j = 0; j < problem.cols(); ++j)
        l_max = std::max(l_max, problem.A.col(j).squaredNorm());
    // A report carries the stepsize it was produced with; an explicit
    // --mu-frac overrides it.
    const double mu = (!args.mu_frac_given && mu_from_report > 0.0) ? mu_from_report
                                                                    : args.mu_frac / l_max;
    const ProxParams params = make_prox_params(problem.reg, mu, problem.q);
    const StationarityReport st = check_stationarity(x, problem, params, mu);
    const LocalMinCertificate cert = certify_local_min(x, problem);
    std::printf("support=%zu min_support_magnitude=%.6g\n", st.support.size(),
                st.min_support_magnitude);
    std::printf("cond_a_ok=%d cond_a_margin=%.6g (tol %.3g)\n", st.cond_a_ok ? 1 : 0,
                st.cond_a_margin, st.tolerances.tol_a);
    std::printf("cond_b_residual=%.6g (tol %.3g)\n", st.cond_b_residual, st.tolerances.tol_b);
    std::printf("cond_c_margin=%.6g (tol %.3g)\n", st.cond_c_margin, st.tolerances.tol_c);
    std::printf("is_stationary=%d\n", st.is_stationary ? 1 : 0);
    std::printf("local_min_holds=%d sigma_min=%.6g e=%.6g lambda_bound=%.6g k=%lld\n",
                cert.holds ? 1 : 0, cert.sigma_min, cert.min_magnitude, cert.lambda_bound,
                static_cast<long long>(cert.k));
    return 0;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"lq-regularized least squares via cyclic coordinate descent"};
    app.set_config("--config", "", "read options from a key=value file");
    app.require_subcommand(1);

    cli_detail::GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic instance directory");
    generate->add_option("--m", gen.m, "number of measurements");
    generate->add_option("--n", gen.n, "signal dimension");
    generate->add_option("--k", gen.k, "sparsity of the planted signal");
    generate->add_option("--snr-db", gen.snr_db, "observation SNR in dB (power ratio)");
    generate->add_flag("--normalize,!--no-normalize", gen.normalize, "unit-normalize columns");
    generate->add_option("--seed", gen.seed, "64-bit generator seed");
    generate->add_option("--out", gen.out, "output directory")->required();
    generate->add_flag("--binary", gen.binary, "write binary matrix files instead of CSV");

    cli_detail::SolveArgs solve;
    CLI::App* solve_cmd = app.add_subcommand("solve", "run one solve on a problem directory");
    solve_cmd->add_option("--problem", solve.problem_dir, "problem directory")->required();
    solve_cmd->add_option("--lambda", solve.lambda, "regularization weight");
    solve_cmd->add_option("--q", solve.q, "penalty exponent in [0.01, 0.99]");
    solve_cmd->add_option("--mu-frac", solve.mu_frac,
                          "stepsize as a fraction of the admissible bound");
    solve_cmd->add_option("--stop-rule", solve.stop_rule, "step-norm | objective | rmse");
    solve_cmd->add_option("--tol", solve.tol, "stop tolerance");
    solve_cmd->add_option("--max-iter", solve.max_iter, "budget in coordinate updates");
    solve_cmd->add_option("--algo", solve.algo, "ccd | ijt | lqcd");
    solve_cmd->add_option("--x0", solve.x0, "'zero' or a vector file");
    solve_cmd->add_flag("--certify", solve.certify, "print and embed certificates");
    solve_cmd->add_flag("--history", solve.history, "record per-cycle diagnostics");
    solve_cmd->add_flag("--allow-unsafe-step", solve.allow_unsafe, "skip the stepsize guard");
    solve_cmd->add_option("--out", solve.out, "write a report file");

    SweepConfig sweep;
    std::string sweep_out;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "stepsize/q sweep with CSV output");
    sweep_cmd->add_option("--m", sweep.m, "number of measurements");
    sweep_cmd->add_option("--n", sweep.n, "signal dimension");
    sweep_cmd->add_option("--k", sweep.k, "sparsity of the planted signal");
    sweep_cmd->add_option("--snr-db", sweep.snr_db, "observation SNR in dB (power ratio)");
    sweep_cmd->add_option("--lambda", sweep.lambda, "regularization weight");
    sweep_cmd->add_option("--q", sweep.q_list, "penalty exponents");
    sweep_cmd->add_option("--mu-frac", sweep.mu_fracs, "stepsize fractions of 1/L_max");
    sweep_cmd->add_option("--tol", sweep.tol, "rmse stopping tolerance");
    sweep_cmd->add_option("--max-iter", sweep.max_iter, "budget in coordinate updates");
    sweep_cmd->add_option("--trials", sweep.trials, "trials per (q, mu) cell");
    sweep_cmd->add_option("--seed", sweep.seed, "base seed of the instance stream");
    sweep_cmd->add_option("--threads", sweep.threads, "worker pool size");
    sweep_cmd->add_flag("--normalize,!--no-normalize", sweep.normalize, "unit-normalize columns");
    sweep_cmd->add_flag("--allow-unsafe", sweep.allow_unsafe, "permit mu_frac = 1");
    sweep_cmd->add_option("--out", sweep_out, "CSV output path (stdout when omitted)");

    cli_detail::CheckArgs check;
    CLI::App* check_cmd = app.add_subcommand("check", "certificates for a stored solution");
    check_cmd->add_option("--problem", check.problem_dir, "problem directory")->required();
    check_cmd->add_option("--x", check.x_file, "solution vector file");
    check_cmd->add_option("--report", check.report_file, "report file from solve --out");
    check_cmd->add_option("--lambda", check.lambda, "regularization weight");
    check_cmd->add_option("--q", check.q, "penalty exponent");
    CLI::Option* check_mu = check_cmd->add_option("--mu-frac", check.mu_frac,
                                                  "stepsize fraction of 1/L_max");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }
    check.mu_frac_given = check_mu->count() > 0;

    try {
        if (generate->parsed()) return cli_detail::cmd_generate(gen);
        if (solve_cmd->parsed()) return cli_detail::cmd_solve(solve);
        if (sweep_cmd->parsed()) return cli_detail::cmd_sweep(sweep, sweep_out);
        if (check_cmd->parsed()) {
            if (check.x_file.empty() == check.report_file.empty())
                throw std::invalid_argument("check: give exactly one of --x or --report");
            return cli_detail::cmd_check(check);
        }
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
    return 0;
}

inline int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("lqsolve");
    for (const auto& arg : args) argv.push_back(arg.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace lq
