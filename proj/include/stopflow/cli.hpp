#pragma once

#include <string>
#include <vector>

namespace stopflow::cli {

/// Full command-line entry point (solve / compare / simulate / verify /
/// catalog). Returns the process exit code: 0 success, 1 check failures
/// under --strict-exit, 2 usage or input errors.
int run(const std::vector<std::string>& args);

}  // namespace stopflow::cli
