#ifndef PEVAL_CLI_HPP
#define PEVAL_CLI_HPP

namespace peval::cli {

/// Entry point of the `peval` tool. Exit codes: 0 success, 1 validation
/// error, 2 numeric failure, 3 I/O error. Diagnostics go to stderr; data
/// goes to files or stdout.
int run(int argc, const char* const* argv);

}  // namespace peval::cli

#endif
