#pragma once

#include <ostream>

namespace selfen {

// Subcommands: train, enhance, eval. Returns 0 on success, 1 on a runtime
// failure, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace selfen
