#include "wbsde/report.hpp"

#include "wbsde/errors.hpp"

#include <array>
#include <chrono>
#include <cstdio>

namespace wbsde {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header) {
    out_.open(path);
    if (!out_) throw ConfigError("cannot open artifact file " + path.string());
    width_ = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw ConfigError("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
}

void CsvWriter::close() { out_.close(); }

JsonlWriter::JsonlWriter(const std::filesystem::path& path) {
    out_.open(path);
    if (!out_) throw ConfigError("cannot open artifact file " + path.string());
}

void JsonlWriter::write(const nlohmann::json& record) { out_ << record.dump() << "\n"; }

void JsonlWriter::close() { out_.close(); }

void write_checks_csv(const std::filesystem::path& path, const std::vector<CheckRow>& rows) {
    CsvWriter csv(path, {"check_id", "lhs", "rhs", "stderr", "verdict"});
    for (const auto& r : rows)
        csv.row({r.check_id, format_double(r.lhs), format_double(r.rhs), format_double(r.se),
                 r.pass ? "PASS" : "FAIL"});
    csv.close();
}

void write_manifest(const std::filesystem::path& path, const nlohmann::json& config,
                    double wall_seconds, const std::vector<CheckRow>& checks) {
    nlohmann::json m;
    m["schema"] = 1;
    m["config"] = config;
    m["git_describe"] = git_describe();
    m["wall_seconds"] = wall_seconds;
    m["generated_unix_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count();
    int failed = 0;
    for (const auto& c : checks) failed += c.pass ? 0 : 1;
    m["checks_total"] = checks.size();
    m["checks_failed"] = failed;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open manifest " + path.string());
    out << m.dump(2) << "\n";
}

std::string git_describe() {
#ifdef _WIN32
    return "unknown";
#else
    std::array<char, 128> buf{};
    FILE* pipe = ::popen("git describe --always --dirty 2>/dev/null", "r");
    if (!pipe) return "unknown";
    std::string out;
    while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    ::pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
#endif
}

}  // namespace wbsde
