#ifndef DTPM_CLI_HPP
#define DTPM_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dtpm::cli {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kUnexpected = 1,
    kConfigError = 2,
    kDataError = 3,
    kNumericError = 4,
};

/// Runs the tool on `args` (without the program name). Progress goes to `log`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace dtpm::cli

#endif
