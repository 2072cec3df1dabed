#ifndef ERSC_CLI_HPP
#define ERSC_CLI_HPP

namespace ersc {

/// Runs the command-line tool. Exit codes: 0 success, 2 configuration
/// problems, 3 solver non-convergence, 4 I/O failures.
int run_cli(int argc, const char* const* argv);

}  // namespace ersc

#endif  // ERSC_CLI_HPP
