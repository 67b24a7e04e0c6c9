#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hbmv::cli {

// Runs one command line (args excludes the program name). Returns the process
// exit code: 0 on success, 2 for bad flags, 10 + error code for library errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hbmv::cli
