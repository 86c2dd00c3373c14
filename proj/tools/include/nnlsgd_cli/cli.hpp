#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "nnlsgd/solvers.hpp"

namespace nnlsgd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs `nnls <command> ...` and returns the process exit code. Normal output
// goes to `out`, diagnostics to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err);

// "const:ETA", "bb", "bb:ETA0", "lipschitz", "lipschitz:K", "nesterov:ETA".
// Throws std::invalid_argument with a one-line reason.
StepRule parse_step(std::string_view text);

// Help text of the top-level app ("") or one subcommand.
std::string help_text(std::string_view command);

}  // namespace nnlsgd::cli
