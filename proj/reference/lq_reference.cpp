#include "lq_reference.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace fbsde::reference {

RiccatiSolution solve_riccati(const LqParams& lq, std::size_t N, std::size_t substeps) {
    if (N == 0 || substeps == 0) throw std::invalid_argument("riccati grid needs N > 0 and substeps > 0");
    if (!(lq.qu > 0.0)) throw std::invalid_argument("riccati oracle needs qu > 0");
    const double dt = lq.T / static_cast<double>(N), hs = dt / static_cast<double>(substeps);
    auto dP = [&](double P) { return -(2.0 * lq.a * P + lq.qx - P * P / lq.qu); };

    RiccatiSolution sol;
    sol.t.resize(N + 1);
    sol.P.resize(N + 1);
    sol.m.resize(N + 1);
    for (std::size_t n = 0; n <= N; ++n) sol.t[n] = lq.T * static_cast<double>(n) / static_cast<double>(N);

    // Backward in time for P.
    sol.P[N] = lq.wT;
    double P = lq.wT;
    for (std::size_t n = N; n-- > 0;) {
        for (std::size_t s = 0; s < substeps; ++s) {
            const double k1 = dP(P), k2 = dP(P - 0.5 * hs * k1), k3 = dP(P - 0.5 * hs * k2), k4 = dP(P - hs * k3);
            P -= hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        sol.P[n] = P;
    }

    // Forward for m, with P interpolated by re-integrating each substep
    // backward from the node value.
    sol.m[0] = lq.x0;
    double m = lq.x0;
    for (std::size_t n = 0; n < N; ++n) {
        // Dense P on this interval, from the right node.
        std::vector<double> Pd(2 * substeps + 1);
        Pd[2 * substeps] = sol.P[n + 1];
        const double hh = hs / 2.0;
        for (std::size_t s = 2 * substeps; s-- > 0;) {
            const double q = Pd[s + 1];
            const double k1 = dP(q), k2 = dP(q - 0.5 * hh * k1), k3 = dP(q - 0.5 * hh * k2), k4 = dP(q - hh * k3);
            Pd[s] = q - hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        auto dm = [&](double Pv, double mv) { return (lq.a - Pv / lq.qu) * mv; };
        for (std::size_t s = 0; s < substeps; ++s) {
            const double P0 = Pd[2 * s], Pm = Pd[2 * s + 1], P1 = Pd[2 * s + 2];
            const double k1 = dm(P0, m), k2 = dm(Pm, m + 0.5 * hs * k1), k3 = dm(Pm, m + 0.5 * hs * k2),
                         k4 = dm(P1, m + hs * k3);
            m += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        sol.m[n + 1] = m;
    }
    return sol;
}

namespace {

using Vec = std::array<double, 3>;
using Mat = std::array<std::array<double, 3>, 3>;

}  // namespace

double exact_affine_cost(const LqParams& lq, std::size_t N, const AffinePolicy& policy) {
    if (lq.h_gain != 0.0) throw std::invalid_argument("exact affine cost needs a constant observation drift");
    if (policy.bias.size() != N || policy.gain.size() != N || policy.avg_gain.size() != N)
        throw std::invalid_argument("affine policy does not match the grid");
    const double dt = lq.T / static_cast<double>(N), h = lq.h0;
    const bool bounded = std::isfinite(lq.u_lower) || std::isfinite(lq.u_upper);
    if (bounded) throw std::invalid_argument("exact affine cost needs an unbounded control set");

    // State s = (x, Y, S), S the running sum of Y_0..Y_n. mu = E s, M = E s s^T.
    Vec mu{lq.x0, 0.0, 0.0};
    Mat M{};
    M[0][0] = lq.x0 * lq.x0;

    const double vx = (lq.c1 * lq.c1 + lq.c2 * lq.c2 + lq.jump_size * lq.jump_size * lq.intensity) * dt;
    const Mat Q{{{vx, lq.c2 * dt, lq.c2 * dt}, {lq.c2 * dt, dt, dt}, {lq.c2 * dt, dt, dt}}};

    double cost = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        // u = w . s + w0
        const Vec w{0.0, policy.gain[n], policy.avg_gain[n] / static_cast<double>(n + 1)};
        const double w0 = policy.bias[n];
        double Eu2 = w0 * w0;
        for (int i = 0; i < 3; ++i) {
            Eu2 += 2.0 * w0 * w[i] * mu[i];
            for (int j = 0; j < 3; ++j) Eu2 += w[i] * w[j] * M[i][j];
        }
        cost += 0.5 * (lq.qx * M[0][0] + lq.qu * Eu2) * dt;

        // s' = A s + c + eps
        Mat A{};
        A[0][0] = 1.0 + lq.a * dt;
        A[0][1] = dt * w[1];
        A[0][2] = dt * w[2];
        A[1][1] = 1.0;
        A[2][1] = 1.0;
        A[2][2] = 1.0;
        const Vec c{dt * w0, h * dt, h * dt};

        Vec mu2{};
        for (int i = 0; i < 3; ++i) {
            mu2[i] = c[i];
            for (int j = 0; j < 3; ++j) mu2[i] += A[i][j] * mu[j];
        }
        Mat AM{}, M2{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) AM[i][j] += A[i][k] * M[k][j];
        Vec Amu{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) Amu[i] += A[i][j] * mu[j];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = Q[i][j] + c[i] * c[j] + Amu[i] * c[j] + c[i] * Amu[j];
                for (int k = 0; k < 3; ++k) s += AM[i][k] * A[j][k];
                M2[i][j] = s;
            }
        mu = mu2;
        M = M2;
    }
    return cost + 0.5 * lq.wT * M[0][0];
}

SearchResult grid_search(const LqParams& lq, std::size_t N, const SearchOptions& options) {
    if (options.grid_points < 3) throw std::invalid_argument("grid search needs at least 3 grid points");
    SearchResult res;
    res.policy = AffinePolicy(N);
    res.cost = exact_affine_cost(lq, N, res.policy);
    res.evaluations = 1;
    std::vector<std::vector<double>*> blocks{&res.policy.bias, &res.policy.gain};
    if (options.running_average) blocks.push_back(&res.policy.avg_gain);

    const std::size_t G = options.grid_points;
    double width = options.initial_width;
    for (std::size_t sweep = 0; sweep < options.max_sweeps && width >= options.min_width; ++sweep) {
        const double before = res.cost;
        for (std::size_t n = 0; n < N; ++n) {
            for (auto* block : blocks) {
                double& coord = (*block)[n];
                const double center = coord;
                double best = center, best_cost = res.cost;
                for (std::size_t g = 0; g < G; ++g) {
                    const double v =
                        center + width * (2.0 * static_cast<double>(g) / static_cast<double>(G - 1) - 1.0);
                    coord = v;
                    const double J = exact_affine_cost(lq, N, res.policy);
                    ++res.evaluations;
                    if (J < best_cost) best_cost = J, best = v;
                }
                coord = best;
                res.cost = best_cost;
            }
        }
        if (!(res.cost < before - 1e-15 * std::abs(before))) width *= 0.25;
    }
    return res;
}

}  // namespace fbsde::reference
