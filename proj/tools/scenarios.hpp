#pragma once

#include "fbsde/problem.hpp"

// Variants of the scalar LQ benchmark with closed-form answers, used by the
// acceptance suite and the tests.
namespace fbsde::cli {

/// phi(x) = x^2 under pure diffusion: a = 0, no jumps. With the zero
/// control, y_0 = x0^2 + (c1^2 + c2^2) T - c2^2 h0^2 dt T on the Euler grid.
ProblemSpec diffusion_square_problem(LqParams lq);

/// phi(x) = x^2 driven by compensated jumps only (c1 = c2 = h0 = 0, a = 0).
/// y_0 = x0^2 + g^2 nu T and the jump coefficient is 2 x g + g^2.
ProblemSpec pure_jump_square_problem(LqParams lq);

/// f = c, phi = 0, h = 0: y_n = -c (T - t_n) exactly.
ProblemSpec deterministic_driver_problem(LqParams lq, double c);

/// LQ with l = qx x^2 / 2 - u^2, concave in u.
ProblemSpec concave_cost_problem(const LqParams& lq);

}  // namespace fbsde::cli
