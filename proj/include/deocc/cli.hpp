#pragma once

#include <iosfwd>

namespace deocc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/**
 * Entry point of the `deocc` executable.
 *
 * Data goes to `out` (or files), diagnostics and usage text to `err`.
 * Returns 0 on success, 1 on contract or runtime errors (and failed checks),
 * 2 on usage errors.
 */
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace deocc
