#pragma once

#include "driftlab/error.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace driftlab::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitFormat = 2,
    kExitAlignment = 3,
    kExitSetting = 4,
    kExitCheckFailed = 5,
};

inline constexpr int kConfigSchemaVersion = 1;

int exit_code_for(ErrorKind kind);

// args excludes the program name
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace driftlab::cli
