#pragma once

// Command-line front end. cli_dispatch is the whole program minus main(),
// so tests can drive it with their own streams.

#include <ostream>

namespace evstore::cli {

/// 0 success, 1 user error, 2 data or corruption error.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evstore::cli
