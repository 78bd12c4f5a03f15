#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace wbsde {

/// Deterministic double formatting shared by every artifact writer: shortest
/// round-trip representation, identical across runs and worker counts.
std::string format_double(double v);

/// One verdict row of the frozen checks.csv schema.
struct CheckRow {
    std::string check_id;
    double lhs = 0.0;
    double rhs = 0.0;
    double se = 0.0;
    bool pass = false;
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void close();

private:
    std::ofstream out_;
    std::size_t width_ = 0;
};

class JsonlWriter {
public:
    explicit JsonlWriter(const std::filesystem::path& path);
    void write(const nlohmann::json& record);
    void close();

private:
    std::ofstream out_;
};

void write_checks_csv(const std::filesystem::path& path, const std::vector<CheckRow>& rows);

/// Run manifest: seed, settings echo, version stamp, wall time. The manifest
/// is the only artifact carrying timestamps.
void write_manifest(const std::filesystem::path& path, const nlohmann::json& config,
                    double wall_seconds, const std::vector<CheckRow>& checks);

std::string git_describe();

}  // namespace wbsde
