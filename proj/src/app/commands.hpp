#pragma once

#include <iosfwd>

namespace mvindex::app {

/// Process exit codes.
enum ExitCode : int {
    exit_ok = 0,
    exit_input = 1,
    exit_nonconvergence = 2,
    exit_infeasible = 3,
};

/// Entry point of the `mvindex` tool: `ingest`, `solve`, `frontier` and
/// `compare` subcommands. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mvindex::app
