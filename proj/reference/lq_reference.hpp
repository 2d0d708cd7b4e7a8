#pragma once

#include <cstddef>
#include <vector>

#include "fbsde/problem.hpp"

// Independent oracles for the scalar LQ benchmark. Nothing here calls the
// Monte-Carlo solvers.
namespace fbsde::reference {

/// Full-information Riccati solution on the grid nodes t_n = n T / N:
/// -P' = 2 a P + qx - P^2 / qu, P(T) = wT, and the closed-loop mean
/// m' = (a - P / qu) m, m(0) = x0. RK4 with `substeps` per grid step.
struct RiccatiSolution {
    std::vector<double> t, P, m;
};
RiccatiSolution solve_riccati(const LqParams& lq, std::size_t N, std::size_t substeps = 50);

/// Affine observation feedback u_n = bias_n + gain_n Y_n + avg_gain_n avg_n
/// on an N-step grid.
struct AffinePolicy {
    std::vector<double> bias, gain, avg_gain;
    explicit AffinePolicy(std::size_t N = 0) : bias(N, 0.0), gain(N, 0.0), avg_gain(N, 0.0) {}
};

/// Exact expected cost of the Euler scheme under an affine policy, by
/// propagating first and second moments of (x, Y, sum of Y) under the
/// observation-drift measure. Needs h constant (h_gain = 0); feature
/// clamping is ignored.
double exact_affine_cost(const LqParams& lq, std::size_t N, const AffinePolicy& policy);

struct SearchOptions {
    bool running_average = false;
    std::size_t grid_points = 21;
    double initial_width = 2.0;
    double min_width = 1e-7;
    std::size_t max_sweeps = 400;
};

struct SearchResult {
    AffinePolicy policy;
    double cost = 0.0;
    std::size_t evaluations = 0;
};

/// Coordinate-wise grid search over every step's (bias, gain[, avg_gain]):
/// each coordinate is set to the best of a symmetric grid around its current
/// value; the grid narrows once a full sweep stops improving.
SearchResult grid_search(const LqParams& lq, std::size_t N, const SearchOptions& options = {});

}  // namespace fbsde::reference
