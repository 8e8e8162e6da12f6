#pragma once

#include <ostream>

namespace pskf::cli {

/// Entry point for the `simulate`, `filter` and `bench` subcommands. Returns
/// the process exit code: 0 success, 1 error, 2 benchmark checks failed.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pskf::cli
