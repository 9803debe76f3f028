#pragma once

namespace sparse_rl {

// Command-line entry point. Subcommands: validate, simulate, hardbench,
// lasso, slope, re. Exit code 0 on success, 1 on domain errors, 2 on usage
// errors. A thin adapter over the library: no numerics live here.
int dispatch(int argc, const char* const* argv);

}  // namespace sparse_rl
