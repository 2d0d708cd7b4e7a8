#pragma once

#include <algorithm>
#include <span>
#include <string>

#include "fbsde/problem.hpp"

namespace fbsde::test {

inline Coefficient coefficient(std::string name, std::size_t in, std::size_t out, Coefficient::Fn value,
                               Coefficient::Fn jac) {
    return {std::move(name), in, out, std::move(value), std::move(jac)};
}

inline void zero(std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); }

// x stays at x0: no drift, no noise loading, no jumps, no observation drift.
inline LqParams frozen_params() {
    LqParams p;
    p.a = 0.0;
    p.c1 = p.c2 = 0.0;
    p.jump_size = 0.0;
    p.h0 = 0.0;
    return p;
}

// Running cost l = value, with the given partials in (x, u).
inline void set_running_cost(ProblemSpec& spec, Coefficient::Fn value, Coefficient::Fn jac) {
    spec.coefficients.l = coefficient("l", spec.backward_layout().size(), 1, std::move(value), std::move(jac));
}

}  // namespace fbsde::test
