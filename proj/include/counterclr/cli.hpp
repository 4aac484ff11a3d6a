#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace counterclr {

// Entry point of the `counterclr` tool. `args` excludes the program name.
// Returns an ExitCode value: 0 success, 2 usage, 3 data, 4 numerical, 5 I/O.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace counterclr
