#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fbsde/forward.hpp"
#include "fbsde/hamiltonian.hpp"
#include "fbsde/noise.hpp"
#include "fbsde/problem.hpp"
#include "fbsde/regression.hpp"
#include "fbsde/tensor.hpp"

namespace fbsde {

/// Raised when the coupled adjoint iteration does not settle. Carries the
/// residual of every sweep.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> residuals)
        : std::runtime_error(what), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

struct PicardOptions {
    std::size_t max_sweeps = 10;
    double tol = 1e-8;
};

/// (y, z1, z2, Lambda) along the sampled paths. Lambda is mark-major per
/// step: component e * m + j is mark e, output j.
struct BsdeSolution {
    Tensor3 y;       // [paths x (N+1) x m]
    Tensor3 z1, z2;  // [paths x N x m]
    Tensor3 Lambda;  // [paths x N x m*M]
    /// Conditional-expectation coefficients per step (standardized basis).
    std::vector<std::vector<double>> coefficients;
};

struct CostBsdeSolution {
    Tensor3 r;       // [paths x (N+1) x 1]
    Tensor3 R1, R2;  // [paths x N x 1]
    Tensor3 R3;      // [paths x N x M]
};

struct AdjointSolution {
    Tensor3 p;       // [paths x (N+1) x n]
    /// E^ubar[p_{n+1} | F_n]: the left-point costate paired with the
    /// coefficients at step n.
    Tensor3 p_eval;  // [paths x N x n]
    Tensor3 q1, q2;  // [paths x N x n]
    Tensor3 q3;      // [paths x N x n*M]
    Tensor3 k;       // [paths x (N+1) x m]
    std::vector<double> picard_residuals;

    /// R2 - sigma2^T p - z2^T k at (path, step).
    double R2adj(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                 const CostBsdeSolution& cost, const TimeGrid& grid, std::size_t path, std::size_t step) const;
};

/// Regression variables at step n: x_n, the policy's observation features
/// (constant excluded) and, if given, extra per-path columns.
std::vector<double> regression_state(const ForwardPath& fwd, std::size_t step, const Tensor3* extra,
                                     std::size_t& vars);

BsdeSolution solve_state_bsde(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise,
                              const TimeGrid& grid, const BasisSpec& basis);

CostBsdeSolution solve_cost_bsde(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise,
                                 const BsdeSolution& state, const TimeGrid& grid, const BasisSpec& basis);

AdjointSolution solve_adjoint(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise,
                              const BsdeSolution& state, const CostBsdeSolution& cost, const TimeGrid& grid,
                              const BasisSpec& basis, const PicardOptions& picard = {});

/// Assembles Hamiltonian points along a solved trajectory. Holds scratch
/// buffers, so use one per worker.
class TrajectoryPoint {
public:
    TrajectoryPoint(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                    const CostBsdeSolution& cost, const TimeGrid& grid);

    /// Primal slots (t, x, y, z1, z2, Lambda, u) at (path, step).
    HamiltonianPoint& primal(std::size_t p, std::size_t step);
    /// Primal and adjoint slots, with R2adj from the left-point costate.
    HamiltonianPoint& load(const AdjointSolution& adj, std::size_t p, std::size_t step);
    /// Recomputes R2adj from the currently loaded p and k.
    void set_R2adj(std::size_t p, std::size_t step);
    HamiltonianPoint& point() { return pt_; }

    static void copy(std::span<const double> from, std::vector<double>& to);

private:
    const ProblemSpec& spec_;
    const ForwardPath& fwd_;
    const BsdeSolution& state_;
    const CostBsdeSolution& cost_;
    const TimeGrid& grid_;
    HamiltonianPoint pt_;
    std::vector<double> arg_, s2_;
};

}  // namespace fbsde
