#pragma once

namespace cmnrec {

/// Entry point for the cmnrec tool. Returns 0 on success, 1 on runtime
/// failure, 2 on bad usage.
int run_cli(int argc, const char* const* argv);

}  // namespace cmnrec
