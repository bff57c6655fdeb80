#pragma once

namespace flowguard {

// Entry point of the flowguard command-line driver. Exit codes:
// 0 success, 1 config error, 2 numeric error, 3 io error.
int cli_main(int argc, const char* const* argv);

} // namespace flowguard
