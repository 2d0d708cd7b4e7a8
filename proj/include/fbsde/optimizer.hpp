#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fbsde/gradient.hpp"

namespace fbsde {

struct OptimizerConfig {
    double step_size = 0.5;
    std::size_t max_iters = 50;
    double tol = 1e-3;  // necessary-condition residual
    std::size_t paths = 100000;
    std::uint64_t seed = 42;
    /// Reuse one noise sample for every iteration. Otherwise iteration i
    /// draws seed + i.
    bool common_random_numbers = true;
    /// Step shrink factor while the cost does not decrease; 0 disables.
    double backtrack = 0.5;
    std::size_t max_backtracks = 8;

    void validate() const;
};

struct IterationRecord {
    std::size_t iter = 0;
    MeanStderr J;
    double residual = 0.0;
    double alpha = 0.0;  // step taken, 0 when no step was attempted
    bool accepted = false;
    std::size_t backtracks = 0;
};

struct OptimizerTrace {
    std::vector<IterationRecord> records;
    bool converged = false;  // residual <= tol
    bool stalled = false;    // no decrease found within the backtracking budget
};

struct StepResult {
    ControlPolicy policy;
    IterationRecord record;
};

/// One projected-gradient step from `policy` on the given noise.
StepResult step(const ProblemSpec& spec, const ControlPolicy& policy, const OptimizerConfig& config,
                const NoiseBundle& noise, const TimeGrid& grid, const SolverSettings& settings);

struct RunResult {
    ControlPolicy policy;
    OptimizerTrace trace;
    OptimalityReport report;
};

/// Iterates until the residual drops to tol or max_iters steps were taken.
/// The final report includes the sufficient-condition certificate when the
/// problem has the required structure.
RunResult run(const ProblemSpec& spec, const ControlPolicy& initial, const OptimizerConfig& config,
              const TimeGrid& grid, const SolverSettings& settings, const SufficientOptions& sufficient);

/// Columns: iter, J, stderr, residual, alpha, accepted, backtracks.
void write_trace_csv(std::ostream& os, const OptimizerTrace& trace);

}  // namespace fbsde
