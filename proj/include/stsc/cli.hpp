#pragma once

namespace stsc {

// Full command-line entry point: parses `stsc <subcommand> ...`, runs the
// pipeline, reports errors on stderr, and returns the process exit status.
int run_cli(int argc, const char* const* argv);

}  // namespace stsc
