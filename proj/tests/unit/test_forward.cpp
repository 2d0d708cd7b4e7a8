#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fbsde/forward.hpp"
#include "fbsde/parallel.hpp"
#include "helpers.hpp"

using namespace fbsde;

namespace {
const ControlSet unit_box{{-1.0}, {1.0}};
}

TEST_CASE("policy evaluation and projection", "[forward]") {
    const std::vector<double> history{0.0, 0.3};
    ControlPolicy pol(unit_box, 2);
    CHECK(evaluate_policy(pol, history, 1)[0] == 0.0);
    pol.fill_feature(0, 0, 2.0);
    CHECK(evaluate_policy(pol, history, 1)[0] == 1.0);
    pol.fill_feature(0, 0, 0.0);
    pol.fill_feature(0, 1, 1.0);
    CHECK(evaluate_policy(pol, history, 1)[0] == Catch::Approx(0.3));
}

TEST_CASE("blending a policy with itself is the identity", "[forward]") {
    ControlPolicy pol(ControlSet::unbounded(1), 5);
    pol.fill_feature(0, 0, 0.4);
    CHECK(ControlPolicy::blend(pol, pol, 0.3) == pol);
}

TEST_CASE("no observation drift gives unit density", "[forward]") {
    LqParams p;
    p.h0 = 0.0;
    const ProblemSpec spec = builtin_lq_problem(p);
    const TimeGrid g = make_grid(1.0, 20);
    const ForwardPath f = simulate_forward(spec, ControlPolicy(spec.control, 20), sample_noise(g, spec.marks, 200, 1), g);
    for (double r : f.rho.raw()) CHECK(r == 1.0);
}

TEST_CASE("frozen dynamics keep x at x0", "[forward]") {
    const ProblemSpec spec = builtin_lq_problem(test::frozen_params());
    const TimeGrid g = make_grid(1.0, 20);
    const ForwardPath f = simulate_forward(spec, ControlPolicy(spec.control, 20), sample_noise(g, spec.marks, 200, 1), g);
    for (double x : f.x.raw()) CHECK(x == spec.x0[0]);
}

TEST_CASE("density is a positive unit-mean martingale", "[forward]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const TimeGrid g = make_grid(1.0, 50);
    const std::size_t P = 20000;
    const ForwardPath f = simulate_forward(spec, ControlPolicy(spec.control, 50), sample_noise(g, spec.marks, P, 8), g);
    for (std::size_t p = 0; p < P; ++p) REQUIRE(f.rho(p, 0) == 1.0);
    for (double r : f.rho.raw()) REQUIRE(r > 0.0);
    const MeanStderr m = mean_stderr(P, [&](std::size_t p) { return f.rho(p, g.N); });
    CHECK(std::abs(m.mean - 1.0) <= 3.0 * m.std_error);
}

TEST_CASE("forward simulation does not depend on the thread count", "[forward]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const TimeGrid g = make_grid(1.0, 20);
    const NoiseBundle nb = sample_noise(g, spec.marks, 7000, 2);
    ControlPolicy pol(spec.control, 20);
    pol.fill_feature(0, 1, -0.5);
    set_thread_count(1);
    const ForwardPath a = simulate_forward(spec, pol, nb, g);
    set_thread_count(3);
    const ForwardPath b = simulate_forward(spec, pol, nb, g);
    set_thread_count(0);
    CHECK(a.x == b.x);
    CHECK(a.rho == b.rho);
    CHECK(a.u == b.u);
}

TEST_CASE("paths CSV has one row per path and node", "[forward]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const TimeGrid g = make_grid(1.0, 4);
    const ForwardPath f = simulate_forward(spec, ControlPolicy(spec.control, 4), sample_noise(g, spec.marks, 10, 2), g);
    std::ostringstream os;
    write_paths_csv(os, f, g, 3);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line.rfind("path,step,t", 0) == 0);
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3 * 5);
}

TEST_CASE("mismatched inputs are rejected", "[forward]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const TimeGrid g = make_grid(1.0, 4);
    const NoiseBundle nb = sample_noise(g, spec.marks, 10, 2);
    CHECK_THROWS_AS(simulate_forward(spec, ControlPolicy(spec.control, 5), nb, g), std::invalid_argument);
}
