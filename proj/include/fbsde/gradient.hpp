#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbsde/bsde.hpp"
#include "fbsde/forward.hpp"
#include "fbsde/parallel.hpp"
#include "fbsde/regression.hpp"

namespace fbsde {

/// How E^ubar[. | G_n] is estimated from reference-measure samples.
enum class ProjectionMethod {
    weighted,  // least squares with weights rho
    ratio,     // regression of rho * target over regression of rho
};

/// Numerical settings shared by every estimator that solves the adjoint.
struct SolverSettings {
    BasisSpec basis{2, 0.0};       // backward regressions
    PicardOptions picard;
    BasisSpec projection{1, 0.0};  // conditional projection on observation features
    ProjectionMethod projection_method = ProjectionMethod::weighted;
    double rho_floor = 1e-8;
    double max_floor_fraction = 0.01;
    std::size_t eval_paths = 1000;  // paths on which residuals are evaluated
};

/// Everything computed along one policy: forward paths, the three backward
/// solutions and H_u at every (path, step).
struct PolicyEvaluation {
    ForwardPath fwd;
    BsdeSolution state;
    CostBsdeSolution cost;
    AdjointSolution adjoint;
    Tensor3 Hu;  // [paths x N x K]
    MeanStderr J;
};

/// Per-path sum rho l dt + rho_N Phi(x_N), without the gamma(y_0) term.
std::vector<double> cost_samples(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                                 const TimeGrid& grid);

/// J = E[sum rho l dt + rho_N Phi(x_N)] + gamma(y_0) from an already solved
/// forward pass and state BSDE.
MeanStderr cost_from(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                     const TimeGrid& grid);

MeanStderr estimate_cost(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                         const TimeGrid& grid, const BasisSpec& basis);

PolicyEvaluation evaluate_policy_full(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                                      const TimeGrid& grid, const SolverSettings& settings);

/// H_u along the trajectory, with the left-point costate.
Tensor3 hamiltonian_u(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                      const CostBsdeSolution& cost, const AdjointSolution& adjoint, const TimeGrid& grid);

/// E[sum_n rho_n <H_u, u_n - ubar_n> dt] for the direction policy u.
MeanStderr directional_derivative(const PolicyEvaluation& base, const ControlPolicy& direction, const TimeGrid& grid);
MeanStderr directional_derivative(const ProblemSpec& spec, const ControlPolicy& base, const ControlPolicy& direction,
                                  const NoiseBundle& noise, const TimeGrid& grid, const SolverSettings& settings);

/// n -> E[rho target | G_n] / E[rho | G_n], where G_n is generated by the
/// policy's observation features at step n. With the weighted method the
/// denominator is identically 1 and the floor never applies.
struct GradientField {
    std::size_t eval_paths = 0;
    std::size_t dims = 0;
    std::vector<PolynomialBasis> bases;               // per step
    std::vector<std::vector<double>> numerator;       // per step, [B x dims]
    std::vector<std::vector<double>> denominator;     // per step, [B]
    Tensor3 projected;                                // [eval_paths x N x dims]
    std::size_t floor_hits = 0;

    /// Ratio at an arbitrary feature point (constant feature excluded).
    void evaluate(std::size_t step, std::span<const double> features, double floor, std::span<double> out) const;
};

GradientField conditional_projection(const Tensor3& target, const Tensor3& rho, const Tensor3& features,
                                     const SolverSettings& settings);

/// max over steps and evaluation paths of |ubar - Proj_U(ubar - projected)|.
double necessary_residual(const ProblemSpec& spec, const ForwardPath& fwd, const GradientField& field);
double necessary_residual(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                          const TimeGrid& grid, const SolverSettings& settings);

/// Gradient of E[sum rho H_u . u dt] in policy coefficients, preconditioned
/// by the rho-weighted feature Gram matrix: per step, the rho-weighted
/// degree-1 regression of H_u (zeroed where the policy output is clipped)
/// on the raw features. Layout matches ControlPolicy::theta_block.
std::vector<double> parameter_gradient(const PolicyEvaluation& ev, const ControlPolicy& policy);

/// Both sides of the exact expansion of J(u) - J(ubar) in terms of the
/// Hamiltonian and the adjoint of ubar.
struct DifferenceReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;
    double std_error = 0.0;  // of the pathwise gap
    double lhs_std_error = 0.0;
};
DifferenceReport difference_formula_check(const ProblemSpec& spec, const ControlPolicy& policy_u,
                                          const ControlPolicy& policy_ubar, const NoiseBundle& noise,
                                          const TimeGrid& grid, const SolverSettings& settings);
/// Same, reusing an evaluation of ubar on the same noise.
DifferenceReport difference_formula_check(const ProblemSpec& spec, const ControlPolicy& policy_u,
                                          const PolicyEvaluation& ubar, const NoiseBundle& noise,
                                          const TimeGrid& grid, const SolverSettings& settings);

struct PerturbationReport {
    std::vector<double> eps;
    std::vector<double> x_gap, y_gap, rho_gap;  // E sup|.|^4, E sup|.|^4, E sup|.|^2
    double x_slope = 0.0, y_slope = 0.0, rho_slope = 0.0;
    bool x_zero = false, y_zero = false, rho_zero = false;
};
PerturbationReport perturbation_order_check(const ProblemSpec& spec, const ControlPolicy& policy,
                                            const ControlPolicy& direction, const NoiseBundle& noise,
                                            const TimeGrid& grid, const std::vector<double>& eps_list,
                                            const BasisSpec& basis);

struct SufficientOptions {
    std::size_t convexity_samples = 200;
    double radius = 1.0;            // spread of convexity sample pairs
    std::size_t grid_points = 21;   // control grid per component
    double grid_half_width = 3.0;   // grid spans [-w, w] intersected with U
    double tol = 1e-4;              // minimization residual threshold
    BasisSpec projection{2, 0.0};   // rho-weighted regression on observation features
    std::size_t regression_paths = 20000;
    std::uint64_t seed = 1;
};

struct SufficientCertificate {
    bool convexity_pass = true;
    std::string convexity_failure;  // which function and block failed first
    std::size_t convexity_checked = 0;
    /// Max over steps of the evaluation-path mean of
    /// max(0, E[H(ubar) - min_v H(v) | G_n]).
    double minimization_residual = 0.0;
    double minimization_residual_max = 0.0;  // pointwise, diagnostic only
    bool minimization_pass = false;
    bool passed() const { return convexity_pass && minimization_pass; }
};

/// Throws SpecError naming the violated restriction unless h depends on t
/// only and phi is linear.
void check_sufficient_structure(const ProblemSpec& spec, std::uint64_t seed);

SufficientCertificate sufficient_check(const ProblemSpec& spec, const PolicyEvaluation& ev, const TimeGrid& grid,
                                       const SolverSettings& settings, const SufficientOptions& options);

struct OptimalityReport {
    MeanStderr cost;
    MeanStderr directional_derivative;  // along one preconditioned descent step
    double necessary_residual = 0.0;
    std::optional<SufficientCertificate> sufficient;
    std::string sufficient_note;  // rejection reason when absent

    /// Flat JSON object with every scalar and standard error.
    std::string to_json() const;
};

OptimalityReport optimality_report(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                                   const TimeGrid& grid, const SolverSettings& settings,
                                   const SufficientOptions& sufficient);

}  // namespace fbsde
