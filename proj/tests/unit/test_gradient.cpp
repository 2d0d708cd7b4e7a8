#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fbsde/gradient.hpp"
#include "helpers.hpp"
#include "lq_reference.hpp"
#include "scenarios.hpp"

using namespace fbsde;

namespace {

// Only l = u^2 / 2 is charged, so J(u) = T u^2 / 2 for constant u.
ProblemSpec control_cost_only() {
    LqParams p = test::frozen_params();
    p.qx = 0.0;
    p.wT = 0.0;
    return builtin_lq_problem(p);
}

ControlPolicy constant(const ProblemSpec& spec, std::size_t N, double u) {
    ControlPolicy pol(spec.control, N);
    pol.fill_feature(0, 0, u);
    return pol;
}

}  // namespace

TEST_CASE("cost closed forms", "[gradient]") {
    const TimeGrid g = make_grid(1.0, 20);
    SECTION("no cost at all") {
        LqParams p;
        p.qx = p.qu = p.wT = 0.0;
        const ProblemSpec spec = builtin_lq_problem(p);
        CHECK(estimate_cost(spec, constant(spec, 20, 1.0), sample_noise(g, spec.marks, 300, 1), g, {}).mean == 0.0);
    }
    SECTION("unit running cost without observation drift") {
        LqParams p;
        p.h0 = 0.0;
        p.wT = 0.0;
        ProblemSpec spec = builtin_lq_problem(p);
        test::set_running_cost(
            spec, [](double, auto, auto out) { out[0] = 1.0; }, [](double, auto, auto jac) { test::zero(jac); });
        const double J = estimate_cost(spec, constant(spec, 20, 0.3), sample_noise(g, spec.marks, 300, 1), g, {}).mean;
        CHECK(std::abs(J - 1.0) <= 1e-12);
    }
}

TEST_CASE("LQ cost matches the exact moment oracle", "[gradient][reference]") {
    const LqParams p;
    const ProblemSpec spec = builtin_lq_problem(p);
    const std::size_t N = 50;
    const TimeGrid g = make_grid(1.0, N);
    reference::AffinePolicy ap(N);
    ControlPolicy pol(spec.control, N);
    for (std::size_t n = 0; n < N; ++n) {
        ap.bias[n] = pol.theta(n, 0, 0) = -0.4 + 0.2 * g.t(n);
        ap.gain[n] = pol.theta(n, 0, 1) = -0.3;
    }
    const MeanStderr J = estimate_cost(spec, pol, sample_noise(g, spec.marks, 20000, 2), g, {});
    CHECK(std::abs(J.mean - reference::exact_affine_cost(p, N, ap)) <= 3.0 * J.std_error);
}

TEST_CASE("directional derivative closed forms", "[gradient]") {
    const ProblemSpec spec = control_cost_only();
    const TimeGrid g = make_grid(1.0, 20);
    const NoiseBundle nb = sample_noise(g, spec.marks, 200, 3);
    const ControlPolicy base = constant(spec, 20, 0.6);
    CHECK(directional_derivative(spec, base, base, nb, g, {}).mean == 0.0);
    // v - ubar = 1 everywhere, H_u = u0.
    const MeanStderr d = directional_derivative(spec, base, constant(spec, 20, 1.6), nb, g, {});
    CHECK(d.mean == Catch::Approx(0.6).margin(1e-12));
}

TEST_CASE("conditional projection", "[gradient]") {
    LqParams p;
    p.h0 = 0.0;
    const ProblemSpec spec = builtin_lq_problem(p);
    const TimeGrid g = make_grid(1.0, 10);
    ControlPolicy pol(spec.control, 10);
    pol.fill_feature(0, 1, 0.5);
    const ForwardPath f = simulate_forward(spec, pol, sample_noise(g, spec.marks, 4000, 4), g);
    const SolverSettings settings;

    Tensor3 c(f.paths(), g.N, 1, -0.75), y(f.paths(), g.N, 1);
    for (std::size_t p = 0; p < f.paths(); ++p)
        for (std::size_t n = 0; n < g.N; ++n) y(p, n) = f.Y(p, n);
    for (ProjectionMethod method : {ProjectionMethod::weighted, ProjectionMethod::ratio}) {
        SolverSettings s = settings;
        s.projection_method = method;
        const GradientField fc = conditional_projection(c, f.rho, f.features, s);
        for (double v : fc.projected.raw()) CHECK(v == Catch::Approx(-0.75).margin(1e-10));
        const GradientField fy = conditional_projection(y, f.rho, f.features, s);
        for (std::size_t p = 0; p < fy.eval_paths; p += 37)
            for (std::size_t n = 0; n < g.N; ++n) CHECK(std::abs(fy.projected(p, n) - f.Y(p, n)) <= 1e-8);
    }
}

TEST_CASE("necessary residual arithmetic", "[gradient]") {
    LqParams p;
    p.u_lower = -1.0;
    p.u_upper = 1.0;
    const ProblemSpec spec = builtin_lq_problem(p);
    const TimeGrid g = make_grid(1.0, 5);
    const ForwardPath f =
        simulate_forward(spec, constant(spec, 5, 0.25), sample_noise(g, spec.marks, 50, 5), g);
    GradientField field;
    field.eval_paths = 50;
    field.dims = 1;
    field.projected = Tensor3(50, 5, 1, 0.0);
    CHECK(necessary_residual(spec, f, field) == 0.0);
    field.projected = Tensor3(50, 5, 1, 0.3);
    CHECK(necessary_residual(spec, f, field) == Catch::Approx(0.3));
    field.projected = Tensor3(50, 5, 1, -2.0);  // the wall at 1 is 0.75 away
    CHECK(necessary_residual(spec, f, field) == Catch::Approx(0.75));
}

TEST_CASE("difference formula closed forms", "[gradient]") {
    const TimeGrid g = make_grid(1.0, 20);
    SECTION("u = ubar") {
        const ProblemSpec spec = builtin_lq_problem({});
        const NoiseBundle nb = sample_noise(g, spec.marks, 500, 6);
        const ControlPolicy u = constant(spec, 20, -0.2);
        const DifferenceReport r = difference_formula_check(spec, u, u, nb, g, {});
        CHECK(r.lhs == 0.0);
        CHECK(r.rhs == 0.0);
    }
    SECTION("control cost only") {
        const ProblemSpec spec = control_cost_only();
        const NoiseBundle nb = sample_noise(g, spec.marks, 200, 6);
        const DifferenceReport r =
            difference_formula_check(spec, constant(spec, 20, 0.8), constant(spec, 20, 0.3), nb, g, {});
        const double exact = 0.5 * (0.64 - 0.09);
        CHECK(r.lhs == Catch::Approx(exact).margin(1e-12));
        CHECK(r.rhs == Catch::Approx(exact).margin(1e-12));
    }
}

TEST_CASE("difference formula on LQ with a non-constant observation drift", "[gradient]") {
    LqParams p;
    p.h_gain = 0.3;
    const ProblemSpec spec = builtin_lq_problem(p);
    const TimeGrid g = make_grid(1.0, 25);
    const NoiseBundle nb = sample_noise(g, spec.marks, 20000, 7);
    ControlPolicy ubar(spec.control, 25), u(spec.control, 25);
    ubar.fill_feature(0, 0, -0.3);
    u.fill_feature(0, 0, 0.1);
    u.fill_feature(0, 1, -0.4);
    const DifferenceReport r = difference_formula_check(spec, u, ubar, nb, g, {});
    INFO("lhs " << r.lhs << " rhs " << r.rhs << " se " << r.std_error);
    CHECK(std::abs(r.gap) <= 3.0 * r.std_error + 2.0 * g.dt * std::abs(r.lhs));
}

TEST_CASE("perturbation gaps", "[gradient]") {
    const TimeGrid g = make_grid(1.0, 20);
    const std::vector<double> eps{0.1, 0.01};
    SECTION("zero direction") {
        const ProblemSpec spec = builtin_lq_problem({});
        const NoiseBundle nb = sample_noise(g, spec.marks, 500, 8);
        const ControlPolicy base = constant(spec, 20, 0.2);
        const PerturbationReport r = perturbation_order_check(spec, base, base, nb, g, eps, {});
        CHECK(r.x_zero);
        CHECK(r.y_zero);
        CHECK(r.rho_zero);
    }
    SECTION("observation drift free of x leaves rho untouched") {
        const ProblemSpec spec = builtin_lq_problem({});
        const NoiseBundle nb = sample_noise(g, spec.marks, 500, 8);
        const PerturbationReport r =
            perturbation_order_check(spec, constant(spec, 20, 0.2), constant(spec, 20, 1.0), nb, g, eps, {});
        CHECK(r.rho_zero);
        CHECK_FALSE(r.x_zero);
    }
}

TEST_CASE("sufficient-condition structure and convexity", "[gradient]") {
    const TimeGrid g = make_grid(1.0, 10);
    SECTION("h depending on x is rejected") {
        LqParams p;
        p.h_gain = 0.2;
        CHECK_THROWS_WITH(check_sufficient_structure(builtin_lq_problem(p), 1),
                          Catch::Matchers::ContainsSubstring("depends on x"));
    }
    SECTION("nonlinear phi is rejected") {
        CHECK_THROWS_WITH(check_sufficient_structure(cli::diffusion_square_problem({}), 1),
                          Catch::Matchers::ContainsSubstring("phi"));
    }
    SECTION("LQ structure is accepted") { CHECK_NOTHROW(check_sufficient_structure(builtin_lq_problem({}), 1)); }
    SECTION("concave running cost fails along u at the first sample") {
        const ProblemSpec spec = cli::concave_cost_problem({});
        const NoiseBundle nb = sample_noise(g, spec.marks, 1000, 9);
        const PolicyEvaluation ev = evaluate_policy_full(spec, ControlPolicy(spec.control, 10), nb, g, {});
        const SufficientCertificate c = sufficient_check(spec, ev, g, {}, {});
        CHECK_FALSE(c.convexity_pass);
        CHECK(c.convexity_failure == "H along u (sample 0)");
        CHECK_FALSE(c.passed());
    }
    SECTION("LQ Hamiltonian is convex") {
        const ProblemSpec spec = builtin_lq_problem({});
        const NoiseBundle nb = sample_noise(g, spec.marks, 1000, 9);
        const PolicyEvaluation ev = evaluate_policy_full(spec, ControlPolicy(spec.control, 10), nb, g, {});
        CHECK(sufficient_check(spec, ev, g, {}, {}).convexity_pass);
    }
}

TEST_CASE("optimality report is a flat JSON record", "[gradient]") {
    LqParams p;
    p.h_gain = 0.2;
    const ProblemSpec spec = builtin_lq_problem(p);
    const TimeGrid g = make_grid(1.0, 10);
    const OptimalityReport r =
        optimality_report(spec, ControlPolicy(spec.control, 10), sample_noise(g, spec.marks, 2000, 10), g, {}, {});
    CHECK_FALSE(r.sufficient.has_value());
    CHECK(r.sufficient_note.find("depends on x") != std::string::npos);
    const std::string j = r.to_json();
    for (const char* key : {"\"cost\"", "\"cost_stderr\"", "\"necessary_residual\"", "\"sufficient_applicable\""})
        CHECK(j.find(key) != std::string::npos);
}

TEST_CASE("policy evaluation is bit-identical across thread counts", "[gradient]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const TimeGrid g = make_grid(1.0, 10);
    const NoiseBundle nb = sample_noise(g, spec.marks, 6000, 11);
    ControlPolicy pol(spec.control, 10);
    pol.fill_feature(0, 1, -0.4);
    set_thread_count(1);
    const PolicyEvaluation a = evaluate_policy_full(spec, pol, nb, g, {});
    set_thread_count(3);
    const PolicyEvaluation b = evaluate_policy_full(spec, pol, nb, g, {});
    set_thread_count(0);
    CHECK(a.J.mean == b.J.mean);
    CHECK(a.J.std_error == b.J.std_error);
    CHECK(a.adjoint.p == b.adjoint.p);
    CHECK(a.Hu == b.Hu);
}
