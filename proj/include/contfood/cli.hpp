#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace contfood::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Runs one command line (argv[0] is the program name). Normal output goes
/// to `out`, diagnostics to `err`; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flattens a JSON document into stable "key: value" lines; nested keys are
/// joined with '.', array elements by index.
std::string render_key_values(const nlohmann::json& j, const std::string& prefix = "");

}  // namespace contfood::cli
