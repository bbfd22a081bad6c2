#pragma once

namespace oclb {

/// Exit codes: 0 success, 1 runtime error, 2 configuration or usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace oclb
