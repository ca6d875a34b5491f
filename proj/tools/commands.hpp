#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mmsb::cli {

/// Runs `mmsb <subcommand> ...`; args[0] is the program name. Returns the
/// process exit code: 0 success, 1 runtime failure, 2 usage or validation.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace mmsb::cli
