#pragma once

#include "growthiv/cli/config.hpp"

#include <iosfwd>

namespace growthiv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNoSpec = 3;

int cmd_sweep(const RunConfig& config, std::ostream& log);
int cmd_counterfactual(const RunConfig& config, std::ostream& log);
int cmd_countfit(const RunConfig& config, std::ostream& log);
int cmd_synth(const RunConfig& config, std::ostream& log);
int cmd_validate(const RunConfig& config, std::ostream& log);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace growthiv::cli
