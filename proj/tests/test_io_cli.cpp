#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lq/cli.hpp"
#include "lq/io.hpp"
#include "lq/problem.hpp"
#include "lq/rng.hpp"
#include "lq/sweep.hpp"

using namespace lq;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lq_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Matrix awkward_matrix() {
    Matrix m(3, 4);
    m << 0.1, -1.0 / 3.0, 1e-17, -2.5e60,   //
        0.0, -0.0, 7.25, 3.141592653589793,  //
        1e-300, 123456789.123456789, -42.0, 5e-324;
    return m;
}

}  // namespace

TEST_CASE("csv matrix round trip is bit exact") {
    const fs::path dir = temp_dir("csv");
    const Matrix m = awkward_matrix();
    save_matrix_csv(dir / "m.csv", m);
    const Matrix back = load_matrix_csv(dir / "m.csv");
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK(back == m);
}

TEST_CASE("binary matrix round trip is bit exact") {
    const fs::path dir = temp_dir("bin");
    const Matrix m = awkward_matrix();
    save_matrix_binary(dir / "m.bin", m);
    CHECK(load_matrix_binary(dir / "m.bin") == m);
}

TEST_CASE("malformed matrix files are rejected") {
    const fs::path dir = temp_dir("bad");
    CHECK_THROWS_AS(load_matrix_csv(dir / "missing.csv"), std::runtime_error);
    {
        std::ofstream out(dir / "ragged.csv");
        out << "1,2,3\n4,5\n";
    }
    CHECK_THROWS_AS(load_matrix_csv(dir / "ragged.csv"), std::runtime_error);
    {
        std::ofstream out(dir / "junk.csv");
        out << "1,banana\n";
    }
    CHECK_THROWS_AS(load_matrix_csv(dir / "junk.csv"), std::runtime_error);
    {
        std::ofstream out(dir / "short.bin", std::ios::binary);
        out << "LQMATBIN";
    }
    CHECK_THROWS_AS(load_matrix_binary(dir / "short.bin"), std::runtime_error);
}

TEST_CASE("problem directories round trip bit exactly") {
    for (bool binary : {false, true}) {
        const fs::path dir = temp_dir(binary ? "prob_bin" : "prob_csv");
        auto [problem, truth] = generate_instance(12, 20, 3, 25.0, true, 77);
        save_problem(dir, problem, &truth, {{"seed", "77"}}, binary);
        const InstanceFiles files = load_problem(dir);
        CHECK(files.problem.A == problem.A);
        CHECK(files.problem.y == problem.y);
        REQUIRE(files.truth.has_value());
        CHECK(files.truth->x_star == truth.x_star);
        CHECK(files.truth->support == truth.support);
        CHECK(files.meta.at("seed") == "77");
    }
}

TEST_CASE("length mismatches are reported on load") {
    const fs::path dir = temp_dir("mismatch");
    auto [problem, truth] = generate_instance(12, 20, 3, 25.0, true, 78);
    save_problem(dir, problem, &truth);
    save_vector(dir / "y.csv", Vector::Zero(5));  // wrong length
    CHECK_THROWS_WITH_AS(load_problem(dir), doctest::Contains("dimension mismatch"),
                         std::runtime_error);
}

TEST_CASE("solve reports round trip through json") {
    const fs::path dir = temp_dir("report");
    auto [problem, truth] = generate_instance(20, 40, 3, 30.0, true, 5);
    problem.reg = 0.01;
    problem.q = 0.5;
    SolverOptions opt;
    opt.step = 0.9;
    opt.tol = 1e-9;
    const SolveReport report = ccd_solve(problem, opt, &truth);
    save_report(dir / "rep.json", report);
    const SolveReport back = load_report(dir / "rep.json");
    CHECK(back.x_final == report.x_final);
    CHECK(back.iterations == report.iterations);
    CHECK(back.cycles == report.cycles);
    CHECK(back.stop_reason == report.stop_reason);
    CHECK(back.support == report.support);
    CHECK(back.mu == report.mu);
    CHECK(back.lambda == report.lambda);
    CHECK(back.objective_final == report.objective_final);
}

TEST_CASE("cli generate/solve/check flow") {
    const fs::path dir = temp_dir("cliflow");
    const std::string inst = (dir / "inst").string();
    const std::string rep = (dir / "rep.json").string();
    CHECK(run_cli({"generate", "--m", "40", "--n", "80", "--k", "4", "--snr-db", "40",
                   "--seed", "9", "--out", inst}) == 0);
    CHECK(run_cli({"solve", "--problem", inst, "--lambda", "0.01", "--q", "0.5", "--mu-frac",
                   "0.9", "--certify", "--history", "--out", rep}) == 0);
    CHECK(fs::exists(rep));
    CHECK(run_cli({"check", "--problem", inst, "--report", rep, "--mu-frac", "0.9"}) == 0);

    // Inadmissible step names the bound and exits nonzero.
    CHECK(run_cli({"solve", "--problem", inst, "--mu-frac", "1.5"}) == 1);
    // rmse rule needs a stored ground truth; this directory has one.
    CHECK(run_cli({"solve", "--problem", inst, "--stop-rule", "rmse", "--tol", "0.05",
                   "--lambda", "0.01"}) == 0);
    // x0 warm start from file.
    const std::string x0 = (dir / "x0.csv").string();
    save_vector(x0, Vector::Zero(80));
    CHECK(run_cli({"solve", "--problem", inst, "--x0", x0, "--lambda", "0.01"}) == 0);
    // check with a raw vector file.
    CHECK(run_cli({"check", "--problem", inst, "--x", x0, "--lambda", "0.01"}) == 0);
    // exactly one of --x/--report.
    CHECK(run_cli({"check", "--problem", inst}) == 1);
}

TEST_CASE("loading an empty directory reports the missing file") {
    const fs::path dir = temp_dir("empty");
    CHECK_THROWS_WITH_AS(load_problem(dir), doctest::Contains("missing A.csv"),
                         std::runtime_error);
}

TEST_CASE("generate --no-normalize leaves raw gaussian columns") {
    const fs::path dir = temp_dir("rawcols");
    const std::string inst = (dir / "inst").string();
    CHECK(run_cli({"generate", "--m", "50", "--n", "80", "--k", "4", "--no-normalize", "--seed",
                   "21", "--out", inst}) == 0);
    const InstanceFiles files = load_problem(inst);
    const ColumnStats stats = column_stats(files.problem.A);
    CHECK(std::abs(stats.l_max - 1.0) > 1e-6);
    CHECK(files.meta.at("normalized") == "0");
}

TEST_CASE("cli runs the jacobi baseline and the stepsize-1 reference") {
    const fs::path dir = temp_dir("clialgo");
    const std::string inst = (dir / "inst").string();
    CHECK(run_cli({"generate", "--m", "30", "--n", "60", "--k", "3", "--snr-db", "40", "--seed",
                   "12", "--out", inst}) == 0);
    CHECK(run_cli({"solve", "--problem", inst, "--lambda", "0.01", "--algo", "ijt", "--mu-frac",
                   "0.9"}) == 0);
    CHECK(run_cli({"solve", "--problem", inst, "--lambda", "0.01", "--algo", "lqcd"}) == 0);
    CHECK(run_cli({"solve", "--problem", inst, "--algo", "nope"}) == 1);
}

TEST_CASE("cli reads options from a key=value config file") {
    const fs::path dir = temp_dir("cliconfig");
    const std::string inst = (dir / "inst").string();
    CHECK(run_cli({"generate", "--m", "30", "--n", "60", "--k", "3", "--seed", "4", "--out",
                   inst}) == 0);
    const fs::path cfg = dir / "solve.cfg";
    {
        std::ofstream out(cfg);
        out << "[solve]\n"
            << "problem=" << inst << "\n"
            << "lambda=0.01\n"
            << "q=0.5\n"
            << "mu-frac=0.8\n";
    }
    CHECK(run_cli({"--config", cfg.string(), "solve"}) == 0);
}

TEST_CASE("sweep rows are deterministic and csv columns are stable") {
    SweepConfig config;
    config.m = 30;
    config.n = 60;
    config.k = 3;
    config.snr_db = 40.0;
    config.lambda = 0.01;
    config.q_list = {0.5};
    config.mu_fracs = {0.5, 0.9};
    config.tol = 1e-2;
    config.max_iter = 60 * 200;
    config.trials = 3;
    config.seed = 99;
    const std::vector<SweepRecord> a = run_sweep(config);
    config.threads = 2;
    const std::vector<SweepRecord> b = run_sweep(config);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].rmse == b[i].rmse);
        CHECK(a[i].updates == b[i].updates);
        CHECK(a[i].cycles == b[i].cycles);
        CHECK(a[i].stop_reason == b[i].stop_reason);
        CHECK(a[i].support_f1 == b[i].support_f1);
        CHECK(a[i].rmse >= 0.0);
        const bool allowed = a[i].stop_reason == StopReason::tolerance_met ||
                             a[i].stop_reason == StopReason::max_iter;
        CHECK(allowed);
    }

    std::ostringstream csv_a, csv_b;
    write_sweep_csv(csv_a, a);
    write_sweep_csv(csv_b, b);
    std::istringstream read_a(csv_a.str()), read_b(csv_b.str());
    std::string line_a, line_b;
    std::getline(read_a, line_a);
    std::getline(read_b, line_b);
    CHECK(line_a == "q,mu_frac,trial,rmse,updates,cycles,wall_time_s,stop_reason,support_f1");
    // Rows match column-for-column except the wall-time field.
    while (std::getline(read_a, line_a) && std::getline(read_b, line_b)) {
        std::vector<std::string> cols_a, cols_b;
        std::stringstream sa(line_a), sb(line_b);
        std::string tok;
        while (std::getline(sa, tok, ',')) cols_a.push_back(tok);
        while (std::getline(sb, tok, ',')) cols_b.push_back(tok);
        REQUIRE(cols_a.size() == 9);
        REQUIRE(cols_b.size() == 9);
        for (std::size_t c = 0; c < 9; ++c)
            if (c != 6) CHECK(cols_a[c] == cols_b[c]);
    }
}

TEST_CASE("sweep config validation") {
    SweepConfig config;
    config.mu_fracs = {1.5};
    CHECK_THROWS_AS(validate(config), std::invalid_argument);
    config.mu_fracs = {1.0};
    CHECK_THROWS_AS(validate(config), std::invalid_argument);
    config.allow_unsafe = true;
    CHECK_NOTHROW(validate(config));
    config.mu_fracs = {0.5};
    config.q_list = {0.999};
    CHECK_THROWS_AS(validate(config), std::invalid_argument);
}

TEST_CASE("cli sweep writes the csv file") {
    const fs::path dir = temp_dir("clisweep");
    const std::string csv = (dir / "sweep.csv").string();
    CHECK(run_cli({"sweep", "--m", "25", "--n", "50", "--k", "3", "--snr-db", "40", "--lambda",
                   "0.01", "--q", "0.5", "--mu-frac", "0.9", "--trials", "2", "--max-iter",
                   "5000", "--seed", "3", "--out", csv}) == 0);
    std::ifstream in(csv);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "q,mu_frac,trial,rmse,updates,cycles,wall_time_s,stop_reason,support_f1");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}
