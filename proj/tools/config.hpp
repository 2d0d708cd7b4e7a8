#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbsde/optimizer.hpp"

namespace fbsde::cli {

/// Malformed or inconsistent experiment configuration (exit status 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PolicyConfig {
    PolicyFeatures features;
    double bias = 0.0;
    double gain = 0.0;
    double avg_gain = 0.0;
    std::string file;  // CSV written by `optimize`; overrides the constants
};

struct GradCheckConfig {
    std::size_t directions = 5;
    double epsilon = 1e-3;
    double amplitude = 0.5;  // size of the random direction offsets
    bool include_zero = true;
    std::uint64_t seed = 7;
};

/// Acceptance thresholds. Every number used to decide pass or fail lives here.
struct Tolerances {
    double martingale_sigmas = 3.0;
    std::size_t hamiltonian_points = 100;
    double hamiltonian_rel_error = 1e-6;
    double gradient_rel = 0.02;
    double gradient_sigmas = 3.0;
    double bsde_sigmas = 3.0;
    double bsde_exact = 1e-8;
    double adjoint_sigmas = 3.0;
    double adjoint_dt_factor = 2.0;
    std::size_t difference_pairs = 3;
    double difference_sigmas = 3.0;
    double difference_dt_factor = 2.0;  // allowance = factor * dt * |lhs|
    std::vector<double> perturbation_eps{0.1, 0.03, 0.01, 0.003};
    double perturbation_slope = 0.5;
    double perturbation_h_gain = 0.3;  // observation drift must see x for the rho gap
    double optimizer_rel = 0.02;
    double optimizer_sigmas = 3.0;
    double fresh_seed_factor = 3.0;
    std::size_t counterexample_paths = 2000;
    std::size_t repro_paths = 10000;
    std::vector<std::size_t> repro_threads{1, 3};
};

struct OutputConfig {
    std::filesystem::path directory = "fbsde_out";
    std::size_t max_paths_csv = 100;
};

struct ExperimentConfig {
    std::string problem = "lq";
    LqParams lq;
    std::size_t N = 100;
    std::size_t paths = 100000;
    std::uint64_t seed = 42;
    std::size_t threads = 0;  // 0: hardware concurrency
    SolverSettings solver;
    PolicyConfig policy;
    OptimizerConfig optimizer;
    GradCheckConfig grad_check;
    SufficientOptions sufficient;
    Tolerances tolerances;
    OutputConfig outputs;

    TimeGrid grid() const { return make_grid(lq.T, N); }
    ProblemSpec spec() const;
    /// Initial policy from the policy section (constants or file).
    ControlPolicy initial_policy(const ProblemSpec& spec) const;

    /// Effective configuration, defaults included, as canonical JSON. Thread
    /// count and output directory are omitted; they do not change results.
    std::string canonical_json() const;
    /// FNV-1a 64 of canonical_json(), hex.
    std::string hash() const;
    /// Comment lines "# config_hash=... seed=..." for output headers.
    std::string header(const std::string& comment = "#") const;
};

/// Strict parse: unknown keys are rejected by dotted name, missing required
/// keys are named, and every value is validated.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Policy CSV with columns step, component, feature, value.
void write_policy_csv(const std::filesystem::path& file, const ControlPolicy& policy, const std::string& header);
ControlPolicy read_policy_csv(const std::filesystem::path& file, const ControlSet& control, std::size_t steps,
                              const PolicyFeatures& features);

}  // namespace fbsde::cli
