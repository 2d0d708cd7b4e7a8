#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fbsde/bsde.hpp"
#include "fbsde/gradient.hpp"
#include "helpers.hpp"
#include "scenarios.hpp"

using namespace fbsde;

namespace {

struct Run {
    ProblemSpec spec;
    TimeGrid grid;
    NoiseBundle noise;
    ForwardPath fwd;
    BsdeSolution state;
};

Run solve(ProblemSpec spec, std::size_t N, std::size_t paths, std::uint64_t seed, const ControlPolicy* pol = nullptr) {
    Run r{std::move(spec), make_grid(1.0, N), {}, {}, {}};
    r.noise = sample_noise(r.grid, r.spec.marks, paths, seed);
    r.fwd = simulate_forward(r.spec, pol ? *pol : ControlPolicy(r.spec.control, N), r.noise, r.grid);
    r.state = solve_state_bsde(r.spec, r.fwd, r.noise, r.grid, {2, 0.0});
    return r;
}

}  // namespace

TEST_CASE("martingale representation of x_T under diffusion", "[bsde]") {
    LqParams p;
    p.a = 0.0;
    p.c2 = 0.0;
    p.jump_size = 0.0;
    p.h0 = 0.0;
    const Run r = solve(builtin_lq_problem(p), 50, 20000, 3);
    const std::size_t P = r.fwd.paths(), N = r.grid.N;
    const double dt = r.grid.dt;
    const MeanStderr y0 = mean_stderr(P, [&](std::size_t i) { return r.fwd.x(i, N); });
    CHECK(std::abs(r.state.y(0, 0) - p.x0) <= 3.0 * y0.std_error);
    const MeanStderr z1 = mean_stderr(P, [&](std::size_t i) { return r.state.y(i, 1) * r.noise.dW(i, 0) / dt; });
    const MeanStderr z2 = mean_stderr(P, [&](std::size_t i) { return r.state.y(i, 1) * r.noise.dY(i, 0) / dt; });
    const MeanStderr lam =
        mean_stderr(P, [&](std::size_t i) { return r.state.y(i, 1) * r.noise.compensated(i, 0, 0) / (p.intensity * dt); });
    CHECK(std::abs(r.state.z1(0, 0) - p.c1) <= 3.0 * z1.std_error);
    CHECK(std::abs(r.state.z2(0, 0)) <= 3.0 * z2.std_error);
    CHECK(std::abs(r.state.Lambda(0, 0, 0)) <= 3.0 * lam.std_error);
}

TEST_CASE("jump martingale representation", "[bsde]") {
    LqParams p;
    p.a = 0.0;
    p.c1 = p.c2 = 0.0;
    p.h0 = 0.0;
    const Run r = solve(builtin_lq_problem(p), 50, 20000, 4);
    const double dt = r.grid.dt;
    const MeanStderr lam = mean_stderr(
        r.fwd.paths(), [&](std::size_t i) { return r.state.y(i, 1) * r.noise.compensated(i, 0, 0) / (p.intensity * dt); });
    CHECK(std::abs(r.state.Lambda(0, 0, 0) - p.jump_size) <= 3.0 * lam.std_error);
}

TEST_CASE("constant driver integrates with the backward sign", "[bsde]") {
    const double c = 1.5;
    const Run r = solve(cli::deterministic_driver_problem({}, c), 40, 3000, 5);
    for (std::size_t n = 0; n <= r.grid.N; ++n)
        for (std::size_t i = 0; i < r.fwd.paths(); i += 97)
            CHECK(std::abs(r.state.y(i, n) + c * (r.grid.T - r.grid.t(n))) <= 1e-8);
}

TEST_CASE("terminal conditions hold on every path", "[bsde]") {
    const Run r = solve(builtin_lq_problem({}), 20, 3000, 6);
    const CostBsdeSolution cost = solve_cost_bsde(r.spec, r.fwd, r.noise, r.state, r.grid, {2, 0.0});
    const AdjointSolution adj = solve_adjoint(r.spec, r.fwd, r.noise, r.state, cost, r.grid, {2, 0.0});
    const LqParams p;
    for (std::size_t i = 0; i < r.fwd.paths(); ++i) {
        const double xN = r.fwd.x(i, r.grid.N);
        REQUIRE(r.state.y(i, r.grid.N) == p.phi0 * xN);
        REQUIRE(cost.r(i, r.grid.N) == 0.5 * p.wT * xN * xN);
        REQUIRE(adj.p(i, r.grid.N) == Catch::Approx(p.wT * xN));  // k vanishes for LQ
        REQUIRE(adj.k(i, 0) == 0.0);
    }
}

TEST_CASE("cost BSDE closed forms", "[bsde]") {
    SECTION("frozen state, quadratic terminal cost") {
        LqParams p = test::frozen_params();
        p.qx = p.qu = 0.0;
        p.wT = 2.0;
        p.x0 = 0.8;
        const Run r = solve(builtin_lq_problem(p), 20, 500, 7);
        const CostBsdeSolution cost = solve_cost_bsde(r.spec, r.fwd, r.noise, r.state, r.grid, {2, 0.0});
        for (double v : cost.r.raw()) CHECK(v == Catch::Approx(0.64).margin(1e-12));
    }
    SECTION("unit running cost") {
        LqParams p;
        p.h0 = 0.0;
        p.wT = 0.0;
        ProblemSpec spec = builtin_lq_problem(p);
        test::set_running_cost(
            spec, [](double, auto, auto out) { out[0] = 1.0; }, [](double, auto, auto jac) { test::zero(jac); });
        const Run r = solve(std::move(spec), 20, 500, 8);
        const CostBsdeSolution cost = solve_cost_bsde(r.spec, r.fwd, r.noise, r.state, r.grid, {2, 0.0});
        CHECK(std::abs(cost.r(0, 0) - 1.0) <= 1e-8);
    }
}

TEST_CASE("cost BSDE agrees with the Bayes-weighted cost", "[bsde]") {
    const Run r = solve(builtin_lq_problem({}), 50, 20000, 9);
    const CostBsdeSolution cost = solve_cost_bsde(r.spec, r.fwd, r.noise, r.state, r.grid, {2, 0.0});
    const MeanStderr J = cost_from(r.spec, r.fwd, r.state, r.grid);
    CHECK(std::abs(cost.r(0, 0) - J.mean) <= 3.0 * J.std_error);
}

TEST_CASE("decoupled adjoint: k vanishes after one sweep", "[bsde]") {
    const Run r = solve(builtin_lq_problem({}), 20, 3000, 10);
    const CostBsdeSolution cost = solve_cost_bsde(r.spec, r.fwd, r.noise, r.state, r.grid, {2, 0.0});
    const AdjointSolution adj = solve_adjoint(r.spec, r.fwd, r.noise, r.state, cost, r.grid, {2, 0.0});
    CHECK(adj.picard_residuals.size() == 1);
    for (double k : adj.k.raw()) CHECK(k == 0.0);
}

TEST_CASE("frozen dynamics with l = x: costate is a backward integral", "[bsde]") {
    LqParams p = test::frozen_params();
    p.wT = 0.5;
    ProblemSpec spec = builtin_lq_problem(p);
    test::set_running_cost(
        spec, [](double, auto arg, auto out) { out[0] = arg[0]; },
        [](double, auto, auto jac) {
            test::zero(jac);
            jac[0] = 1.0;
        });
    const Run r = solve(std::move(spec), 25, 500, 11);
    const CostBsdeSolution cost = solve_cost_bsde(r.spec, r.fwd, r.noise, r.state, r.grid, {2, 0.0});
    const AdjointSolution adj = solve_adjoint(r.spec, r.fwd, r.noise, r.state, cost, r.grid, {2, 0.0});
    for (std::size_t n = 0; n <= r.grid.N; ++n)
        CHECK(adj.p(3, n) == Catch::Approx(p.wT * p.x0 + (r.grid.T - r.grid.t(n))).margin(1e-10));
}

TEST_CASE("Picard iteration with a zero sweep budget fails loudly", "[bsde]") {
    const Run r = solve(builtin_lq_problem({}), 10, 500, 12);
    const CostBsdeSolution cost = solve_cost_bsde(r.spec, r.fwd, r.noise, r.state, r.grid, {2, 0.0});
    CHECK_THROWS_AS(solve_adjoint(r.spec, r.fwd, r.noise, r.state, cost, r.grid, {2, 0.0}, {0, 1e-8}),
                    ConvergenceError);
}
