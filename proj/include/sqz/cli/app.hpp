#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace sqz::cli {

/// Exit codes of the sqzbench tool.
enum ExitCode : int { kOk = 0, kConfigError = 2, kRuntimeError = 3 };

/// Run the tool. argv[0] is the program name. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Summary of a run trace given as record objects (as written to
/// trace.ndjson): best squeezing, where it happened and the convergence
/// table.
nlohmann::json summarize_trace(const std::vector<nlohmann::json>& records);

}  // namespace sqz::cli
