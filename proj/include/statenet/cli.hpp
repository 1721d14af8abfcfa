#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace statenet::cli {

// Exit codes: 0 success, 1 invalid arguments, 2 data errors, 3 numeric failure.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

std::string sha256_hex(const std::string& bytes);

}  // namespace statenet::cli
