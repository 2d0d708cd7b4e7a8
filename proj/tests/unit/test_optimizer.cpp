#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fbsde/optimizer.hpp"
#include "helpers.hpp"
#include "lq_reference.hpp"

using namespace fbsde;

namespace {

ProblemSpec control_cost_only() {
    LqParams p = test::frozen_params();
    p.qx = 0.0;
    p.wT = 0.0;
    return builtin_lq_problem(p);
}

OptimizerConfig small_config(std::size_t paths) {
    OptimizerConfig c;
    c.paths = paths;
    return c;
}

}  // namespace

TEST_CASE("config preconditions", "[optimizer]") {
    OptimizerConfig c;
    CHECK_NOTHROW(c.validate());
    c.step_size = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.tol = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("stationary policy is left unchanged", "[optimizer]") {
    const ProblemSpec spec = control_cost_only();
    const TimeGrid g = make_grid(1.0, 10);
    const NoiseBundle nb = sample_noise(g, spec.marks, 500, 1);
    const ControlPolicy zero(spec.control, 10);
    const StepResult s = step(spec, zero, small_config(500), nb, g, {});
    CHECK(s.policy == zero);
}

TEST_CASE("one step on the pure control cost halves the control", "[optimizer]") {
    const ProblemSpec spec = control_cost_only();
    const TimeGrid g = make_grid(1.0, 10);
    const NoiseBundle nb = sample_noise(g, spec.marks, 500, 1);
    ControlPolicy one(spec.control, 10);
    one.fill_feature(0, 0, 1.0);
    const StepResult s = step(spec, one, small_config(500), nb, g, {});
    CHECK(s.record.accepted);
    for (std::size_t n = 0; n < 10; ++n) {
        CHECK(s.policy.theta(n, 0, 0) == Catch::Approx(0.5).margin(1e-12));
        CHECK(s.policy.theta(n, 0, 1) == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("max_iters = 0 evaluates only", "[optimizer]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const TimeGrid g = make_grid(1.0, 10);
    OptimizerConfig c = small_config(2000);
    c.max_iters = 0;
    const ControlPolicy zero(spec.control, 10);
    const RunResult r = run(spec, zero, c, g, {}, {});
    CHECK(r.policy == zero);
    REQUIRE(r.trace.records.size() == 1);
    CHECK(r.trace.records[0].alpha == 0.0);
    CHECK_FALSE(r.trace.converged);
}

TEST_CASE("LQ from zero: costs decrease for the first ten iterations", "[optimizer]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const std::size_t N = 50;
    const TimeGrid g = make_grid(1.0, N);
    OptimizerConfig c = small_config(10000);
    c.max_iters = 10;
    c.tol = 1e-9;
    const RunResult r = run(spec, ControlPolicy(spec.control, N), c, g, {}, {});
    REQUIRE(r.trace.records.size() >= 2);
    double last = r.trace.records.front().J.mean;
    for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
        INFO("iteration " << i);
        CHECK(r.trace.records[i].J.mean <= last);
        last = r.trace.records[i].J.mean;
    }
    std::ostringstream os;
    write_trace_csv(os, r.trace);
    CHECK(os.str().rfind("iter,J,stderr,residual,alpha,accepted,backtracks\n", 0) == 0);
}

TEST_CASE("near-optimal affine gains terminate quickly", "[optimizer]") {
    const LqParams p;
    const ProblemSpec spec = builtin_lq_problem(p);
    const std::size_t N = 100;
    const TimeGrid g = make_grid(1.0, N);
    const reference::SearchResult best = reference::grid_search(p, N);
    ControlPolicy init(spec.control, N);
    for (std::size_t n = 0; n < N; ++n) {
        init.theta(n, 0, 0) = best.policy.bias[n];
        init.theta(n, 0, 1) = best.policy.gain[n];
    }
    // Default sample size: at 2e4 paths the starting residual sits near 1e-2
    // from sampling noise alone and a third step is needed.
    const RunResult r = run(spec, init, OptimizerConfig{}, g, {}, {});
    INFO("iterations " << r.trace.records.size() - 1 << ", final residual " << r.trace.records.back().residual);
    CHECK(r.trace.converged);
    CHECK(r.trace.records.size() - 1 <= 2);
}
