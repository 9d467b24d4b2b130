#pragma once

namespace nppc {

/// Entry point of the `nppc` tool. Returns the process exit code:
/// 0 success, 2 usage, 3 data validation, 4 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace nppc
