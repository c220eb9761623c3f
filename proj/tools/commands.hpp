#pragma once

#include <iosfwd>

namespace vcr::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kIo = 3,
  kNumeric = 4,
};

// Parses argv and runs the selected subcommand. Normal output goes to `out`,
// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vcr::cli
