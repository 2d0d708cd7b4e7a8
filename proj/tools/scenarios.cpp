#include "scenarios.hpp"

#include <algorithm>

namespace fbsde::cli {

namespace {

Coefficient make(std::string name, std::size_t in, std::size_t out, Coefficient::Fn value, Coefficient::Fn jac) {
    return {std::move(name), in, out, std::move(value), std::move(jac)};
}

void zero(std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); }

void square_terminal(ProblemSpec& spec) {
    spec.coefficients.phi = make(
        "phi", 1, 1, [](double, auto x, auto out) { out[0] = x[0] * x[0]; },
        [](double, auto x, auto jac) { jac[0] = 2.0 * x[0]; });
}

}  // namespace

ProblemSpec diffusion_square_problem(LqParams lq) {
    lq.a = 0.0;
    lq.jump_size = 0.0;
    lq.intensity = 0.0;
    lq.h_gain = 0.0;
    ProblemSpec spec = builtin_lq_problem(lq);
    spec.name = "diffusion_square";
    square_terminal(spec);
    return spec;
}

ProblemSpec pure_jump_square_problem(LqParams lq) {
    lq.a = 0.0;
    lq.c1 = lq.c2 = 0.0;
    lq.h0 = lq.h_gain = 0.0;
    ProblemSpec spec = builtin_lq_problem(lq);
    spec.name = "pure_jump_square";
    square_terminal(spec);
    return spec;
}

ProblemSpec deterministic_driver_problem(LqParams lq, double c) {
    lq.h0 = lq.h_gain = 0.0;
    ProblemSpec spec = builtin_lq_problem(lq);
    spec.name = "deterministic_driver";
    const std::size_t bdim = spec.backward_layout().size();
    spec.coefficients.f = make(
        "f", bdim, 1, [c](double, auto, auto out) { out[0] = c; }, [](double, auto, auto jac) { zero(jac); });
    spec.coefficients.phi = make(
        "phi", 1, 1, [](double, auto, auto out) { out[0] = 0.0; }, [](double, auto, auto jac) { jac[0] = 0.0; });
    return spec;
}

ProblemSpec concave_cost_problem(const LqParams& lq) {
    ProblemSpec spec = builtin_lq_problem(lq);
    spec.name = "concave_cost";
    const std::size_t bdim = spec.backward_layout().size();
    const std::size_t bu = spec.backward_layout().u();
    spec.coefficients.l = make(
        "l", bdim, 1,
        [qx = lq.qx, bu](double, auto arg, auto out) { out[0] = 0.5 * qx * arg[0] * arg[0] - arg[bu] * arg[bu]; },
        [qx = lq.qx, bu](double, auto arg, auto jac) {
            zero(jac);
            jac[0] = qx * arg[0];
            jac[bu] = -2.0 * arg[bu];
        });
    return spec;
}

}  // namespace fbsde::cli
