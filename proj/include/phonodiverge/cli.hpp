#pragma once

#include <ostream>

namespace phonodiverge {

/// Runs one subcommand. Data goes to `out`, diagnostics and usage to `err`.
/// Returns 0 on success, 1 on usage or validation errors, 2 on I/O errors.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace phonodiverge
