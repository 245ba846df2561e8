#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lq/analysis.hpp"
#include "lq/problem.hpp"
#include "lq/solver.hpp"

namespace lq {

namespace io_detail {

inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token, const std::string& context) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r')) --last;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
        throw std::runtime_error("malformed number in " + context + ": '" + std::string(token) + "'");
    return value;
}

}  // namespace io_detail

// Plain-text matrix format: one row per line, comma-separated doubles printed
// with shortest round-trip precision, so save/load is bit-exact.
inline void save_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << io_detail::format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Matrix load_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("file not found: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            const std::size_t comma = line.find(',', start);
            const std::size_t end = (comma == std::string::npos) ? line.size() : comma;
            row.push_back(io_detail::parse_double(
                std::string_view(line).substr(start, end - start), path.string()));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged rows in " + path.string());
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty matrix file: " + path.string());
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

// Binary format: 8-byte magic, u64 rows, u64 cols, then row-major doubles,
// all little-endian.
inline constexpr char kMatrixMagic[8] = {'L', 'Q', 'M', 'A', 'T', 'B', 'I', 'N'};

inline void save_matrix_binary(const std::filesystem::path& path, const Matrix& m) {
    static_assert(std::endian::native == std::endian::little,
                  "binary matrix format requires a little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(kMatrixMagic, 8);
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Matrix load_matrix_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("file not found: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMatrixMagic, 8) != 0)
        throw std::runtime_error("bad magic in " + path.string());
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    if (!in || rows == 0 || cols == 0 || rows > (1ull << 32) || cols > (1ull << 32))
        throw std::runtime_error("bad header in " + path.string());
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    std::vector<double> row(cols);
    for (std::uint64_t i = 0; i < rows; ++i) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(cols * sizeof(double)));
        if (!in) throw std::runtime_error("truncated data in " + path.string());
        for (std::uint64_t j = 0; j < cols; ++j)
            m(static_cast<Index>(i), static_cast<Index>(j)) = row[j];
    }
    return m;
}

inline void save_vector(const std::filesystem::path& path, const Vector& v, bool binary = false) {
    Matrix m(v.size(), 1);
    m.col(0) = v;
    binary ? save_matrix_binary(path, m) : save_matrix_csv(path, m);
}

inline Vector load_vector(const std::filesystem::path& path) {
    const Matrix m = (path.extension() == ".bin") ? load_matrix_binary(path) : load_matrix_csv(path);
    if (m.cols() != 1 && m.rows() != 1)
        throw std::runtime_error("expected a vector in " + path.string());
    return (m.cols() == 1) ? Vector(m.col(0)) : Vector(m.row(0).transpose());
}

// A problem directory holds A, y, the optional planted truth, and meta.txt
// with key=value lines.
struct InstanceFiles {
    Problem problem;  // reg and q left at defaults; set them before solving
    std::optional<GroundTruth> truth;
    std::map<std::string, std::string> meta;
};

inline void save_problem(const std::filesystem::path& dir, const Problem& problem,
                         const GroundTruth* truth = nullptr,
                         const std::map<std::string, std::string>& meta = {},
                         bool binary = false) {
    std::filesystem::create_directories(dir);
    const char* ext = binary ? ".bin" : ".csv";
    if (binary) {
        save_matrix_binary(dir / "A.bin", problem.A);
    } else {
        save_matrix_csv(dir / "A.csv", problem.A);
    }
    save_vector(dir / (std::string("y") + ext), problem.y, binary);
    if (truth != nullptr) save_vector(dir / (std::string("xstar") + ext), truth->x_star, binary);
    std::ofstream out(dir / "meta.txt");
    if (!out) throw std::runtime_error("cannot write meta.txt in " + dir.string());
    for (const auto& [key, value] : meta) out << key << '=' << value << '\n';
    if (truth != nullptr) out << "snr_db=" << io_detail::format_double(truth->snr_db) << '\n';
    out << "format=" << (binary ? "binary" : "csv") << '\n';
}

inline InstanceFiles load_problem(const std::filesystem::path& dir) {
    InstanceFiles files;
    const auto pick = [&](const char* stem) -> std::filesystem::path {
        const auto csv = dir / (std::string(stem) + ".csv");
        const auto bin = dir / (std::string(stem) + ".bin");
        if (std::filesystem::exists(csv)) return csv;
        if (std::filesystem::exists(bin)) return bin;
        throw std::runtime_error("missing " + std::string(stem) + ".csv/.bin in " + dir.string());
    };
    const auto a_path = pick("A");
    files.problem.A =
        (a_path.extension() == ".bin") ? load_matrix_binary(a_path) : load_matrix_csv(a_path);
    files.problem.y = load_vector(pick("y"));
    if (files.problem.y.size() != files.problem.A.rows())
        throw std::runtime_error("dimension mismatch: y has length " +
                                 std::to_string(files.problem.y.size()) + " but A has " +
                                 std::to_string(files.problem.A.rows()) + " rows");
    const auto xstar_csv = dir / "xstar.csv";
    const auto xstar_bin = dir / "xstar.bin";
    if (std::filesystem::exists(xstar_csv) || std::filesystem::exists(xstar_bin)) {
        GroundTruth truth;
        truth.x_star = load_vector(std::filesystem::exists(xstar_csv) ? xstar_csv : xstar_bin);
        if (truth.x_star.size() != files.problem.A.cols())
            throw std::runtime_error("dimension mismatch: xstar has length " +
                                     std::to_string(truth.x_star.size()) + " but A has " +
                                     std::to_string(files.problem.A.cols()) + " columns");
        for (Index i = 0; i < truth.x_star.size(); ++i)
            if (truth.x_star[i] != 0.0) truth.support.push_back(i);
        files.truth = std::move(truth);
    }
    std::ifstream meta_in(dir / "meta.txt");
    std::string line;
    while (meta_in && std::getline(meta_in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto eq = line.find('=');
        if (eq != std::string::npos) files.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (files.truth && files.meta.count("snr_db"))
        files.truth->snr_db = io_detail::parse_double(files.meta["snr_db"], "meta.txt");
    return files;
}

// ---- report serialization (JSON) ----

namespace io_detail {

inline nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

inline Vector vector_from_json(const nlohmann::json& arr) {
    Vector v(static_cast<Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Index>(i)] = arr[i].get<double>();
    return v;
}

inline nlohmann::json stationarity_to_json(const StationarityReport& rep) {
    nlohmann::json j;
    j["support_size"] = rep.support.size();
    j["min_support_magnitude"] =
        std::isfinite(rep.min_support_magnitude) ? nlohmann::json(rep.min_support_magnitude)
                                                 : nlohmann::json("inf");
    j["cond_a_ok"] = rep.cond_a_ok;
    j["cond_a_margin"] = std::isfinite(rep.cond_a_margin) ? nlohmann::json(rep.cond_a_margin)
                                                          : nlohmann::json("inf");
    j["cond_b_residual"] = rep.cond_b_residual;
    j["cond_c_margin"] = std::isfinite(rep.cond_c_margin) ? nlohmann::json(rep.cond_c_margin)
                                                          : nlohmann::json("inf");
    j["is_stationary"] = rep.is_stationary;
    j["tol_a"] = rep.tolerances.tol_a;
    j["tol_b"] = rep.tolerances.tol_b;
    j["tol_c"] = rep.tolerances.tol_c;
    return j;
}

inline nlohmann::json certificate_to_json(const LocalMinCertificate& cert) {
    nlohmann::json j;
    j["k"] = cert.k;
    j["sigma_min"] =
        std::isfinite(cert.sigma_min) ? nlohmann::json(cert.sigma_min) : nlohmann::json("inf");
    j["min_magnitude"] = std::isfinite(cert.min_magnitude) ? nlohmann::json(cert.min_magnitude)
                                                           : nlohmann::json("inf");
    j["lambda_bound"] = std::isfinite(cert.lambda_bound) ? nlohmann::json(cert.lambda_bound)
                                                         : nlohmann::json("inf");
    j["holds"] = cert.holds;
    return j;
}

}  // namespace io_detail

inline void save_report(const std::filesystem::path& path, const SolveReport& report,
                        const StationarityReport* stationarity = nullptr,
                        const LocalMinCertificate* certificate = nullptr) {
    nlohmann::json j;
    j["algo"] = report.algo;
    j["mu"] = report.mu;
    j["lambda"] = report.lambda;
    j["q"] = report.q;
    j["l_max"] = report.l_max;
    j["tol"] = report.tol;
    j["stop_rule"] = to_string(report.stop_rule);
    j["stop_reason"] = to_string(report.stop_reason);
    j["iterations"] = report.iterations;
    j["cycles"] = report.cycles;
    j["objective"] = report.objective_final;
    j["wall_time_s"] = report.wall_time_s;
    j["outside_theory"] = report.outside_theory;
    if (std::isfinite(report.rmse)) j["rmse"] = report.rmse;
    if (report.support_stable_since) j["support_stable_since"] = *report.support_stable_since;
    if (report.stagnated_at_cycle >= 0) j["stagnated_at_cycle"] = report.stagnated_at_cycle;
    j["support"] = report.support;
    j["sign"] = report.sign_pattern;
    j["x_final"] = io_detail::vector_to_json(report.x_final);
    if (!report.cycle_history.empty()) {
        nlohmann::json obj = nlohmann::json::array();
        nlohmann::json stp = nlohmann::json::array();
        for (const auto& rec : report.cycle_history) {
            obj.push_back(rec.objective);
            stp.push_back(rec.step_sq);
        }
        j["history"] = {{"objective", obj}, {"step_sq", stp}};
    }
    if (stationarity != nullptr) j["stationarity"] = io_detail::stationarity_to_json(*stationarity);
    if (certificate != nullptr) j["local_min"] = io_detail::certificate_to_json(*certificate);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline SolveReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("file not found: " + path.string());
    nlohmann::json j;
    in >> j;
    SolveReport report;
    report.algo = j.value("algo", "ccd");
    report.mu = j.value("mu", 0.0);
    report.lambda = j.value("lambda", 0.0);
    report.q = j.value("q", 0.5);
    report.l_max = j.value("l_max", 0.0);
    report.tol = j.value("tol", 0.0);
    report.iterations = j.value("iterations", 0L);
    report.cycles = j.value("cycles", 0L);
    report.objective_final = j.value("objective", 0.0);
    report.wall_time_s = j.value("wall_time_s", 0.0);
    report.outside_theory = j.value("outside_theory", false);
    if (j.contains("rmse")) report.rmse = j["rmse"].get<double>();
    if (j.contains("support_stable_since"))
        report.support_stable_since = j["support_stable_since"].get<long>();
    if (j.contains("stagnated_at_cycle"))
        report.stagnated_at_cycle = j["stagnated_at_cycle"].get<long>();
    const std::string reason = j.value("stop_reason", "max_iter");
    report.stop_reason = (reason == "tolerance_met") ? StopReason::tolerance_met
                         : (reason == "stagnation")  ? StopReason::stagnation
                                                     : StopReason::max_iter;
    const std::string rule = j.value("stop_rule", "step-norm");
    report.stop_rule = (rule == "rmse")        ? StopRule::rmse
                       : (rule == "objective") ? StopRule::objective_decrease
                                               : StopRule::step_norm;
    if (j.contains("support"))
        for (const auto& idx : j["support"]) report.support.push_back(idx.get<Index>());
    if (j.contains("sign"))
        for (const auto& s : j["sign"]) report.sign_pattern.push_back(s.get<std::int8_t>());
    report.x_final = io_detail::vector_from_json(j.at("x_final"));
    return report;
}

}  // namespace lq
