#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace hefir::cli {

// 0 success, 2 format error, 3 parameter mismatch, 4 capacity or verification failure.
enum ExitCode : int { kOk = 0, kFailure = 1, kFormat = 2, kMismatch = 3, kCapacity = 4 };

int exit_code_for(const std::exception& e);

// Parses args (without the program name) and runs one command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hefir::cli
