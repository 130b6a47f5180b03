#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace echolab::cli {

/// Name of the environment variable holding the default output directory.
inline constexpr const char* kOutputDirEnv = "ECHO_LAB_OUTPUT_DIR";

/// Runs one `echo-lab` invocation. `args` excludes the program name.
///
/// Exit codes: 0 success, 2 input error, 3 fit did not converge (outputs
/// are still written), 4 round-trip pass fraction below threshold.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace echolab::cli
