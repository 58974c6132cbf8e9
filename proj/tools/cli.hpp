#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dyadapt::cli {

enum ExitCode : int
{
  exit_ok = 0,
  exit_invalid = 1,
  exit_infeasible = 2,
  exit_numeric = 3
};

// Runs one invocation. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& bytes);

// Path of the manifest written next to an output file.
std::string manifest_path(const std::string& output);

} // namespace dyadapt::cli
