#pragma once

#include <functional>
#include <string>

#include "cli.hpp"

namespace fcco::cli {

// Runs body and maps library errors to exit codes, reporting them on stderr.
int guarded(const std::string& command, const std::function<int()>& body);

}  // namespace fcco::cli
