#pragma once

#include <string>
#include <vector>

namespace cstrans {

inline constexpr const char* kToolVersion = "0.1.0";

// Runs one command line (argv[0] is the program name). Returns the process
// exit code: 0 success, 1 usage error, 2 data error, 3 numerical failure.
// Never throws; errors are reported on stderr.
int dispatch(int argc, const char* const* argv);

// Convenience overload for tests: args exclude the program name.
int dispatch(const std::vector<std::string>& args);

}  // namespace cstrans
