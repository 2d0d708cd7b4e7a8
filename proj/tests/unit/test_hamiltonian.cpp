#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fbsde/hamiltonian.hpp"
#include "scenarios.hpp"

using namespace fbsde;

namespace {
LqParams tilted() {
    LqParams p;
    p.h_gain = 0.4;
    return p;
}
}  // namespace

TEST_CASE("zero adjoints leave the running cost", "[hamiltonian]") {
    const ProblemSpec spec = builtin_lq_problem({});
    for (const auto& pt : random_points(spec, 20, 1)) {
        HamiltonianPoint z = pt;
        std::fill(z.p.begin(), z.p.end(), 0.0);
        std::fill(z.q1.begin(), z.q1.end(), 0.0);
        std::fill(z.q2.begin(), z.q2.end(), 0.0);
        std::fill(z.q3.begin(), z.q3.end(), 0.0);
        std::fill(z.k.begin(), z.k.end(), 0.0);
        z.R2adj = 0.0;
        const double l = 0.5 * (z.x[0] * z.x[0] + z.u[0] * z.u[0]);
        CHECK(eval_H(spec, z) == Catch::Approx(l).margin(1e-14));
        CHECK(grad_H(spec, z, Wrt::u)[0] == Catch::Approx(z.u[0]).margin(1e-14));
    }
}

TEST_CASE("LQ Hamiltonian matches a term-by-term assembly", "[hamiltonian]") {
    const LqParams p = tilted();
    const ProblemSpec spec = builtin_lq_problem(p);
    for (const auto& pt : random_points(spec, 50, 2)) {
        const double x = pt.x[0], u = pt.u[0];
        const double by_hand = 0.5 * (p.qx * x * x + p.qu * u * u) + pt.p[0] * (p.a * x + u) + pt.q1[0] * p.c1 +
                               pt.q2[0] * p.c2 + pt.q3[0] * p.jump_size * p.intensity + pt.k[0] * 0.0 +
                               pt.R2adj * (p.h0 + p.h_gain * std::tanh(x));
        CHECK(std::abs(eval_H(spec, pt) - by_hand) <= 1e-12);
    }
}

TEST_CASE("gradients agree with central differences", "[hamiltonian]") {
    for (const ProblemSpec& spec : {builtin_lq_problem({}), builtin_lq_problem(tilted()),
                                    cli::concave_cost_problem({}), cli::diffusion_square_problem({})}) {
        const auto pts = random_points(spec, 100, 3);
        const FiniteDiffReport r = finite_diff_check(spec, pts, 1e-6);
        INFO(spec.name << " worst " << r.worst_block << "[" << r.worst_index << "] " << r.max_rel_error);
        CHECK(r.passed);
    }
}

TEST_CASE("quadratic costs differentiate exactly; zero tolerance always fails", "[hamiltonian]") {
    const ProblemSpec spec = builtin_lq_problem({});
    const auto pts = random_points(spec, 10, 4);
    const FiniteDiffReport r = finite_diff_check(spec, pts, 1e-6);
    CHECK(r.max_rel_error <= 1e-9);
    CHECK_FALSE(finite_diff_check(spec, pts, 0.0).passed);
}

TEST_CASE("H is linear in each adjoint entry", "[hamiltonian]") {
    const ProblemSpec spec = builtin_lq_problem(tilted());
    const HamiltonianPoint base = random_points(spec, 1, 5)[0];
    HamiltonianPoint zeroed = base;
    auto slots = [](HamiltonianPoint& h) {
        return std::vector<double*>{&h.p[0], &h.q1[0], &h.q2[0], &h.q3[0], &h.k[0], &h.R2adj};
    };
    for (std::size_t s = 0; s < 6; ++s) *slots(zeroed)[s] = 0.0;
    const double H0 = eval_H(spec, zeroed);
    for (std::size_t s = 0; s < 6; ++s) {
        HamiltonianPoint one = zeroed, two = zeroed;
        *slots(one)[s] = 0.7;
        *slots(two)[s] = 1.4;
        const double d1 = eval_H(spec, one) - H0, d2 = eval_H(spec, two) - H0;
        CHECK(d2 == Catch::Approx(2.0 * d1).margin(1e-12));
    }
}

TEST_CASE("control-free jumps do not enter H_u; zero intensity, no jump term", "[hamiltonian]") {
    const ProblemSpec spec = builtin_lq_problem({});
    HamiltonianPoint pt = random_points(spec, 1, 6)[0];
    const double hu = grad_H(spec, pt, Wrt::u)[0];
    pt.q3[0] += 10.0;
    CHECK(grad_H(spec, pt, Wrt::u)[0] == hu);

    LqParams silent;
    silent.intensity = 0.0;
    const ProblemSpec nomarks = builtin_lq_problem(silent);
    HamiltonianPoint q = HamiltonianPoint::zeros(nomarks);
    for (double& v : q.q3) v = 5.0;
    q.x = {0.3};
    q.u = {0.2};
    q.p = {1.0};
    const double H = eval_H(nomarks, q);
    CHECK(H == Catch::Approx(0.5 * (0.09 + 0.04) + (-0.3 + 0.2)));
}
