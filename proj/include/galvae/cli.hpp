#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace galvae {

/// Runs one CLI invocation. Returns the process exit code: 0 success,
/// 1 usage, 2 data/format, 3 numerical. Failures print a single line
/// `error[<kind>] code=<n>: <message>` to err.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The root --help text.
std::string cli_help();

}  // namespace galvae
