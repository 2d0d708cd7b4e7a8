#pragma once

#include <iosfwd>
#include <string>

#include "config.hpp"

namespace fbsde::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Runs one of simulate, grad-check, optimize, verify-mp, lq-bench. Artifacts
/// go to cfg.outputs.directory, a summary to `out`, progress to `log`.
/// Returns the exit status; module errors propagate as exceptions.
int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& out, std::ostream& log);

}  // namespace fbsde::cli
