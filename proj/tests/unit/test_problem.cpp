#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fbsde/gradient.hpp"
#include "helpers.hpp"
#include "lq_reference.hpp"

using namespace fbsde;

TEST_CASE("LQ spec passes validation", "[problem]") {
    const ValidationReport r = validate_spec(builtin_lq_problem({}), 100, 3);
    for (const auto* f : r.failures()) INFO(f->name << ": " << f->detail);
    CHECK(r.passed());
}

TEST_CASE("wrong output dimension names the evaluator", "[problem]") {
    ProblemSpec spec = builtin_lq_problem({});
    spec.coefficients.b.out_dim = 2;
    try {
        spec.check_dimensions();
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
}

TEST_CASE("unbounded observation drift fails the boundedness check", "[problem]") {
    ProblemSpec spec = builtin_lq_problem({});
    spec.coefficients.h = test::coefficient(
        "h", 2, 1, [](double, auto arg, auto out) { out[0] = arg[0]; },
        [](double, auto, auto jac) {
            jac[0] = 1.0;
            jac[1] = 0.0;
        });
    const ValidationReport r = validate_spec(spec, 100, 3);
    CHECK_FALSE(r.passed());
    bool flagged = false;
    for (const auto* f : r.failures()) flagged = flagged || f->name == "h bounded";
    CHECK(flagged);
}

TEST_CASE("LQ parameter preconditions", "[problem]") {
    LqParams p;
    p.qx = -1.0;
    CHECK_THROWS_AS(builtin_lq_problem(p), SpecError);
    p = {};
    p.intensity = -0.5;
    CHECK_THROWS_AS(builtin_lq_problem(p), SpecError);
    p = {};
    p.u_lower = 1.0;
    p.u_upper = 0.0;
    CHECK_THROWS_AS(builtin_lq_problem(p), SpecError);
}

TEST_CASE("zero cost weights give zero cost for any control", "[problem]") {
    LqParams p;
    p.qx = p.qu = p.wT = 0.0;
    const ProblemSpec spec = builtin_lq_problem(p);
    const TimeGrid grid = make_grid(1.0, 20);
    const NoiseBundle noise = sample_noise(grid, spec.marks, 500, 9);
    ControlPolicy pol(spec.control, 20);
    pol.fill_feature(0, 0, 0.7);
    pol.fill_feature(0, 1, -1.3);
    CHECK(estimate_cost(spec, pol, noise, grid, {}).mean == 0.0);
}

TEST_CASE("no jump intensity reproduces the diffusion-only paths", "[problem]") {
    LqParams silent, diffusion;
    silent.intensity = 0.0;
    diffusion.jump_size = 0.0;
    const ProblemSpec a = builtin_lq_problem(silent), b = builtin_lq_problem(diffusion);
    const TimeGrid grid = make_grid(1.0, 25);
    const ControlPolicy pol(a.control, 25);
    const ForwardPath fa = simulate_forward(a, pol, sample_noise(grid, a.marks, 300, 4), grid);
    const ForwardPath fb = simulate_forward(b, pol, sample_noise(grid, b.marks, 300, 4), grid);
    CHECK(fa.x == fb.x);
    CHECK(fa.rho == fb.rho);
}

TEST_CASE("deterministic LQ: Riccati open loop attains the Riccati cost", "[problem][reference]") {
    LqParams p;
    p.c1 = p.c2 = 0.0;
    p.intensity = 0.0;
    p.h0 = 0.0;
    p.wT = 0.0;
    const std::size_t N = 200;
    const ProblemSpec spec = builtin_lq_problem(p);
    const TimeGrid grid = make_grid(1.0, N);
    const auto ric = reference::solve_riccati(p, N);
    ControlPolicy pol(spec.control, N);
    for (std::size_t n = 0; n < N; ++n) pol.theta(n, 0, 0) = -ric.P[n] * ric.m[n] / p.qu;
    const double J = estimate_cost(spec, pol, sample_noise(grid, spec.marks, 4, 1), grid, {}).mean;
    const double oracle = 0.5 * ric.P[0] * p.x0 * p.x0;
    CHECK(std::abs(J - oracle) <= 2.0 * grid.dt * oracle);
}
