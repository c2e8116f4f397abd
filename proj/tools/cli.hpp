#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace orlicz::cli {

/// Exit statuses of the command-line tool.
enum Exit : int { kOk = 0, kUsage = 1, kScenarioFailed = 2, kPlanFailed = 3 };

/// Runs the tool on args (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orlicz::cli
