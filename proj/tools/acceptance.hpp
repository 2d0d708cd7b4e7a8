#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"

namespace fbsde::cli {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

struct AcceptanceReport {
    std::string header;
    std::vector<CriterionResult> criteria;

    bool passed() const;
    /// One "criterion <id> <name>: PASS|FAIL <detail>" line each, after the header.
    std::string text() const;
    std::string to_json() const;
};

/// One row of the variational-formula check.
struct GradCheckRow {
    std::string direction;
    MeanStderr adjoint;        // Hamiltonian-based directional derivative
    MeanStderr finite_diff;    // central difference with common random numbers
    double abs_error = 0.0;
    double rel_error = 0.0;
    double allowance = 0.0;    // max(rel * |fd|, sigmas * combined stderr)
    bool passed = false;
};

/// Affine policy u_n = -P_n m_n / qu from the Riccati mean path (gains zero).
ControlPolicy riccati_bias_policy(const ExperimentConfig& cfg, const ProblemSpec& spec);

/// base plus a smooth random offset in every active feature.
ControlPolicy random_offset_policy(const ControlPolicy& base, const TimeGrid& grid, double amplitude,
                                   std::uint64_t seed);

std::vector<GradCheckRow> gradient_check(const ExperimentConfig& cfg, const ProblemSpec& spec,
                                         const ControlPolicy& base, const NoiseBundle& noise,
                                         const TimeGrid& grid);
std::string grad_check_table(const std::vector<GradCheckRow>& rows);

/// Runs every acceptance criterion on the configured LQ problem. Progress
/// and timings go to `log` (never into the report, which must be
/// reproducible byte for byte).
AcceptanceReport run_acceptance(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace fbsde::cli
