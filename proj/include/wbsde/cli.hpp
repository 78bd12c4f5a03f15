#pragma once

#include "wbsde/report.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace wbsde::cli {

/// Parses a config file, raising ConfigError with location diagnostics.
nlohmann::json load_config_file(const std::string& path);

/// Schema validation; throws ConfigError naming the offending field.
void validate_config(const nlohmann::json& config);

struct RunOutcome {
    int exit_code = 0;  // 0 all checks pass, 1 otherwise
    std::vector<CheckRow> checks;
    std::vector<std::string> failed_ids;
    std::filesystem::path artifacts_dir;
};

/// Executes a validated config, writing artifacts under artifacts_dir.
RunOutcome run_config(const nlohmann::json& config,
                      const std::filesystem::path& artifacts_dir);

// Subcommand entry points (exit codes: 0 ok, 1 check failure, 2 bad config).
int command_run(const std::string& config_path, const std::string& artifacts_override,
                int workers_override, std::ostream& log);
int command_list_fixtures(std::ostream& out);
int command_validate_config(const std::string& config_path, std::ostream& out);

}  // namespace wbsde::cli
