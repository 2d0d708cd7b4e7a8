// Statistical stability of the optimizer's stopping rule.
#include <catch2/catch_amalgamated.hpp>

#include "fbsde/optimizer.hpp"

using namespace fbsde;

TEST_CASE("stopping residual re-evaluated on a fresh seed stays within 3 tol", "[property]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const TimeGrid g = make_grid(1.0, 100);
    OptimizerConfig c;
    c.paths = 20000;
    const RunResult r = run(spec, ControlPolicy(spec.control, 100), c, g, {}, {});
    REQUIRE(r.trace.converged);
    const double fresh = necessary_residual(spec, r.policy, sample_noise(g, spec.marks, c.paths, c.seed + 1000), g, {});
    INFO("own-sample residual " << r.trace.records.back().residual << ", fresh-seed residual " << fresh);
    CHECK(fresh <= 3.0 * c.tol);
}
