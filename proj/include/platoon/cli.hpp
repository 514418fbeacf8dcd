#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace platoon::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kValidationFailed = 1,  // `validate` found a failing property
  kConfigError = 2,       // bad flags, config schema violation or unreadable input data
  kCollision = 3,         // a run ended with a closed gap
  kIoError = 4,           // outputs could not be written
};

/// Environment variable consulted for the output directory when neither
/// --out nor the config's output.dir is given.
inline constexpr const char* kOutDirEnv = "PLATOON_OUT_DIR";

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace platoon::cli
