#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbsde/noise.hpp"
#include "fbsde/problem.hpp"
#include "fbsde/tensor.hpp"

namespace fbsde {

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Which functionals of the observation path feed the policy.
/// The constant feature 1 is always present and comes first.
struct PolicyFeatures {
    bool current_y = true;
    bool running_average = false;
    /// Features are clamped to [-clamp, clamp]; with an unbounded control
    /// set this keeps every realized control bounded pathwise.
    double clamp = 100.0;

    std::size_t count() const { return 1 + (current_y ? 1 : 0) + (running_average ? 1 : 0); }
    bool operator==(const PolicyFeatures&) const = default;
};

/// Observation-adapted feedback u_n = Proj_U(theta_n . phi(Y_0..Y_n)) with
/// piecewise-constant coefficients theta_n (K x F per step).
///
/// A policy may also be a weighted combination of such terms,
/// Proj_U(sum_j w_j Proj_U(theta_j . phi)); this represents the convex
/// perturbations ubar + eps (u - ubar) exactly, projection included.
class ControlPolicy {
public:
    ControlPolicy() = default;
    ControlPolicy(ControlSet control, std::size_t steps, PolicyFeatures features = {});

    std::size_t steps() const { return steps_; }
    std::size_t control_dim() const { return control_.dim(); }
    std::size_t feature_count() const { return features_.count(); }
    const PolicyFeatures& features() const { return features_; }
    const ControlSet& control_set() const { return control_; }
    bool is_simple() const { return terms_.size() == 1; }

    /// Coefficient for control component k, feature f at step n. Only valid
    /// for single-term policies.
    double& theta(std::size_t n, std::size_t k, std::size_t f);
    double theta(std::size_t n, std::size_t k, std::size_t f) const;
    std::span<double> theta_block(std::size_t n);
    std::span<const double> theta_block(std::size_t n) const;

    /// Sets coefficients of feature f for every step (bias: f = 0).
    void fill_feature(std::size_t k, std::size_t f, double value);

    /// Feature vector phi at step n from the observation value and running
    /// average at that step.
    void feature_vector(double y_now, double y_avg, std::span<double> out) const;

    /// u for a given feature vector at step n.
    void evaluate(std::size_t n, std::span<const double> phi, std::span<double> u) const;

    /// (1 - eps) * a + eps * b, as a combination of terms.
    static ControlPolicy blend(const ControlPolicy& a, const ControlPolicy& b, double eps);

    bool operator==(const ControlPolicy&) const = default;

private:
    struct Term {
        double weight = 1.0;
        std::vector<double> theta;  // [steps][K][F]
        bool operator==(const Term&) const = default;
    };

    ControlSet control_;
    std::size_t steps_ = 0;
    PolicyFeatures features_;
    std::vector<Term> terms_;
};

/// Control at step n given the observation history Y_0..Y_n.
std::vector<double> evaluate_policy(const ControlPolicy& policy, std::span<const double> y_history, std::size_t step);

/// Sampled forward trajectories under the reference measure.
struct ForwardPath {
    Tensor3 x;         // [paths x (N+1) x n]
    Tensor3 Y;         // [paths x (N+1) x 1]
    Tensor3 rho;       // [paths x (N+1) x 1]
    Tensor3 u;         // [paths x N x K]
    Tensor3 h;         // [paths x N x 1], h(t_n, x_n, u_n)
    Tensor3 features;  // [paths x N x F], policy feature vectors (constant first)

    std::size_t paths() const { return x.paths(); }
    std::size_t steps() const { return u.steps(); }
};

/// Euler scheme with left-point coefficients and compensated jump counts;
/// log-Euler update for the density rho.
ForwardPath simulate_forward(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                             const TimeGrid& grid);

/// Plot-ready CSV of the first `max_paths` paths
/// (columns: path, step, t, x..., Y, rho, u...).
void write_paths_csv(std::ostream& os, const ForwardPath& fwd, const TimeGrid& grid, std::size_t max_paths);

}  // namespace fbsde
