#include "fbsde/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"

namespace fbsde {

namespace {

void backward_arg(const BackwardLayout& lay, const ForwardPath& fwd, const BsdeSolution& state, std::size_t p,
                  std::size_t step, std::vector<double>& arg) {
    const auto x = fwd.x.row(p, step);
    std::copy(x.begin(), x.end(), arg.begin());
    const std::size_t m = lay.m;
    for (std::size_t j = 0; j < m; ++j) {
        arg[lay.y() + j] = state.y(p, step, j);
        arg[lay.z1() + j] = state.z1(p, step, j);
        arg[lay.z2() + j] = state.z2(p, step, j);
    }
    for (std::size_t c = 0; c < m * lay.marks; ++c) arg[lay.lambda() + c] = state.Lambda(p, step, c);
    const auto u = fwd.u.row(p, step);
    std::copy(u.begin(), u.end(), arg.begin() + static_cast<std::ptrdiff_t>(lay.u()));
}

// Observation features without the constant, first `rows` paths: [rows x (F-1)].
std::vector<double> observation_vars(const Tensor3& features, std::size_t step, std::size_t rows) {
    const std::size_t F = features.comps(), V = F - 1;
    std::vector<double> out(rows * V);
    for (std::size_t p = 0; p < rows; ++p) {
        const auto f = features.row(p, step);
        std::copy(f.begin() + 1, f.end(), out.begin() + static_cast<std::ptrdiff_t>(p * V));
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}


void require_same_features(const ForwardPath& fwd, const ControlPolicy& policy) {
    if (policy.feature_count() != fwd.features.comps() || policy.steps() != fwd.steps())
        throw std::invalid_argument("policy features or steps do not match the evaluated trajectory");
}

}  // namespace

std::vector<double> cost_samples(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                                 const TimeGrid& grid) {
    const std::size_t P = fwd.paths(), N = grid.N;
    const BackwardLayout lay = spec.backward_layout();
    const CoefficientBundle& cb = spec.coefficients;
    const double dt = grid.dt;
    std::vector<double> samples(P);
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        std::vector<double> arg(lay.size());
        for (std::size_t p = b; p < e; ++p) {
            double s = 0.0;
            for (std::size_t step = 0; step < N; ++step) {
                backward_arg(lay, fwd, state, p, step, arg);
                s += fwd.rho(p, step) * cb.l.scalar(grid.t(step), arg) * dt;
            }
            samples[p] = s + fwd.rho(p, N) * cb.Phi.scalar(grid.T, fwd.x.row(p, N));
        }
    });
    return samples;
}

MeanStderr cost_from(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                     const TimeGrid& grid) {
    const std::vector<double> samples = cost_samples(spec, fwd, state, grid);
    MeanStderr J = mean_stderr(samples.size(), [&](std::size_t p) { return samples[p]; });
    // y_0 is deterministic: the initial state and observation are fixed.
    J.mean += spec.coefficients.gamma.scalar(0.0, state.y.row(0, 0));
    if (!std::isfinite(J.mean)) throw NumericalError("non-finite cost estimate");
    return J;
}

MeanStderr estimate_cost(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                         const TimeGrid& grid, const BasisSpec& basis) {
    const ForwardPath fwd = simulate_forward(spec, policy, noise, grid);
    const BsdeSolution state = solve_state_bsde(spec, fwd, noise, grid, basis);
    return cost_from(spec, fwd, state, grid);
}

Tensor3 hamiltonian_u(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                      const CostBsdeSolution& cost, const AdjointSolution& adjoint, const TimeGrid& grid) {
    const std::size_t P = fwd.paths(), N = grid.N, K = spec.k;
    Tensor3 Hu(P, N, K);
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        TrajectoryPoint loader(spec, fwd, state, cost, grid);
        Hamiltonian H(spec);
        for (std::size_t step = 0; step < N; ++step)
            for (std::size_t p = b; p < e; ++p) H.gradient(loader.load(adjoint, p, step), Wrt::u, Hu.row(p, step));
    });
    return Hu;
}

PolicyEvaluation evaluate_policy_full(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                                      const TimeGrid& grid, const SolverSettings& settings) {
    PolicyEvaluation ev;
    ev.fwd = simulate_forward(spec, policy, noise, grid);
    ev.state = solve_state_bsde(spec, ev.fwd, noise, grid, settings.basis);
    ev.cost = solve_cost_bsde(spec, ev.fwd, noise, ev.state, grid, settings.basis);
    ev.adjoint = solve_adjoint(spec, ev.fwd, noise, ev.state, ev.cost, grid, settings.basis, settings.picard);
    ev.Hu = hamiltonian_u(spec, ev.fwd, ev.state, ev.cost, ev.adjoint, grid);
    ev.J = cost_from(spec, ev.fwd, ev.state, grid);
    return ev;
}

MeanStderr directional_derivative(const PolicyEvaluation& base, const ControlPolicy& direction,
                                  const TimeGrid& grid) {
    const ForwardPath& fwd = base.fwd;
    require_same_features(fwd, direction);
    const std::size_t P = fwd.paths(), N = grid.N, K = fwd.u.comps();
    std::vector<double> samples(P);
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        std::vector<double> v(K);
        for (std::size_t p = b; p < e; ++p) {
            double s = 0.0;
            for (std::size_t step = 0; step < N; ++step) {
                direction.evaluate(step, fwd.features.row(p, step), v);
                const auto ubar = fwd.u.row(p, step);
                const auto hu = base.Hu.row(p, step);
                double inner = 0.0;
                for (std::size_t k = 0; k < K; ++k) inner += hu[k] * (v[k] - ubar[k]);
                s += fwd.rho(p, step) * inner * grid.dt;
            }
            samples[p] = s;
        }
    });
    return mean_stderr(P, [&](std::size_t p) { return samples[p]; });
}

MeanStderr directional_derivative(const ProblemSpec& spec, const ControlPolicy& base, const ControlPolicy& direction,
                                  const NoiseBundle& noise, const TimeGrid& grid, const SolverSettings& settings) {
    return directional_derivative(evaluate_policy_full(spec, base, noise, grid, settings), direction, grid);
}

void GradientField::evaluate(std::size_t step, std::span<const double> features, double floor,
                             std::span<double> out) const {
    const PolynomialBasis& basis = bases.at(step);
    std::vector<double> phi(basis.size());
    basis.eval(features, phi);
    const std::size_t B = basis.size();
    double den = 0.0;
    for (std::size_t i = 0; i < B; ++i) den += phi[i] * denominator[step][i];
    den = std::max(den, floor);
    for (std::size_t d = 0; d < dims; ++d) {
        double num = 0.0;
        for (std::size_t i = 0; i < B; ++i) num += phi[i] * numerator[step][i * dims + d];
        out[d] = num / den;
    }
}

GradientField conditional_projection(const Tensor3& target, const Tensor3& rho, const Tensor3& features,
                                     const SolverSettings& settings) {
    const std::size_t P = target.paths(), N = target.steps(), D = target.comps();
    if (rho.paths() != P || features.paths() != P || features.steps() != N || rho.steps() < N)
        throw std::invalid_argument("projection inputs have inconsistent shapes");
    if (features.comps() == 0) throw std::invalid_argument("projection needs the constant feature");
    const std::size_t V = features.comps() - 1, W = D + 1;

    GradientField field;
    field.dims = D;
    field.eval_paths = std::min(P, settings.eval_paths);
    const std::size_t E = field.eval_paths;
    field.projected = Tensor3(E, N, D);
    field.bases.resize(N);
    field.numerator.resize(N);
    field.denominator.resize(N);

    for (std::size_t step = 0; step < N; ++step) {
        const auto vars = observation_vars(features, step, P);
        if (settings.projection_method == ProjectionMethod::weighted) {
            std::vector<double> weights(P);
            for (std::size_t p = 0; p < P; ++p) weights[p] = rho(p, step);
            const Regression reg(vars, P, V, target.slice(step), D, settings.projection, weights);
            field.bases[step] = reg.basis();
            field.numerator[step] = reg.coefficients();
            field.denominator[step].assign(reg.basis_size(), 0.0);
            field.denominator[step][0] = 1.0;  // the intercept term
            const auto& fit = reg.fitted();
            for (std::size_t p = 0; p < E; ++p)
                for (std::size_t d = 0; d < D; ++d) field.projected(p, step, d) = fit[p * D + d];
            continue;
        }
        std::vector<double> targets(P * W);
        for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t p = b; p < e; ++p) {
                const double r = rho(p, step);
                for (std::size_t d = 0; d < D; ++d) targets[p * W + d] = r * target(p, step, d);
                targets[p * W + D] = r;
            }
        });
        const Regression reg(vars, P, V, targets, W, settings.projection);
        const std::size_t B = reg.basis_size();
        const auto& coef = reg.coefficients();
        field.bases[step] = reg.basis();
        field.numerator[step].resize(B * D);
        field.denominator[step].resize(B);
        for (std::size_t i = 0; i < B; ++i) {
            for (std::size_t d = 0; d < D; ++d) field.numerator[step][i * D + d] = coef[i * W + d];
            field.denominator[step][i] = coef[i * W + D];
        }
        const auto& fit = reg.fitted();
        for (std::size_t p = 0; p < E; ++p) {
            double den = fit[p * W + D];
            if (den < settings.rho_floor) {
                ++field.floor_hits;
                den = settings.rho_floor;
            }
            for (std::size_t d = 0; d < D; ++d) field.projected(p, step, d) = fit[p * W + d] / den;
        }
    }
    const double limit = settings.max_floor_fraction * static_cast<double>(E * N);
    if (static_cast<double>(field.floor_hits) > limit) {
        std::ostringstream os;
        os << "conditional density fell below the floor at " << field.floor_hits << " of " << E * N
           << " evaluation points";
        throw NumericalError(os.str());
    }
    return field;
}

double necessary_residual(const ProblemSpec& spec, const ForwardPath& fwd, const GradientField& field) {
    const std::size_t K = spec.k, N = field.projected.steps();
    std::vector<double> w(K);
    double worst = 0.0;
    for (std::size_t p = 0; p < field.eval_paths; ++p) {
        for (std::size_t step = 0; step < N; ++step) {
            const auto u = fwd.u.row(p, step);
            const auto g = field.projected.row(p, step);
            for (std::size_t k = 0; k < K; ++k) w[k] = u[k] - g[k];
            spec.control.project(w);
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) s += (u[k] - w[k]) * (u[k] - w[k]);
            worst = std::max(worst, std::sqrt(s));
        }
    }
    return worst;
}

double necessary_residual(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                          const TimeGrid& grid, const SolverSettings& settings) {
    const PolicyEvaluation ev = evaluate_policy_full(spec, policy, noise, grid, settings);
    return necessary_residual(spec, ev.fwd, conditional_projection(ev.Hu, ev.fwd.rho, ev.fwd.features, settings));
}

std::vector<double> parameter_gradient(const PolicyEvaluation& ev, const ControlPolicy& policy) {
    if (!policy.is_simple()) throw std::invalid_argument("parameter gradient needs a single-term policy");
    const ForwardPath& fwd = ev.fwd;
    require_same_features(fwd, policy);
    const std::size_t P = fwd.paths(), N = fwd.steps(), K = policy.control_dim(), F = policy.feature_count();
    const ControlSet& U = policy.control_set();
    std::vector<double> grad(N * K * F, 0.0);
    for (std::size_t step = 0; step < N; ++step) {
        const auto vars = observation_vars(fwd.features, step, P);
        const auto theta = policy.theta_block(step);
        std::vector<double> targets(P * K), weights(P);
        for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t p = b; p < e; ++p) {
                const auto phi = fwd.features.row(p, step);
                weights[p] = fwd.rho(p, step);
                for (std::size_t k = 0; k < K; ++k) {
                    const double raw = dot(theta.subspan(k * F, F), phi);
                    // Clipped outputs do not respond to their coefficients.
                    const bool active = raw > U.lower[k] && raw < U.upper[k];
                    targets[p * K + k] = active ? ev.Hu(p, step, k) : 0.0;
                }
            }
        });
        const Regression reg(vars, P, F - 1, targets, K, BasisSpec{1, 0.0}, weights);
        const auto raw = reg.raw_linear();  // [F x K]
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t f = 0; f < F; ++f) grad[(step * K + k) * F + f] = raw[f * K + k];
    }
    return grad;
}

DifferenceReport difference_formula_check(const ProblemSpec& spec, const ControlPolicy& policy_u,
                                          const ControlPolicy& policy_ubar, const NoiseBundle& noise,
                                          const TimeGrid& grid, const SolverSettings& settings) {
    const PolicyEvaluation bar = evaluate_policy_full(spec, policy_ubar, noise, grid, settings);
    return difference_formula_check(spec, policy_u, bar, noise, grid, settings);
}

DifferenceReport difference_formula_check(const ProblemSpec& spec, const ControlPolicy& policy_u,
                                          const PolicyEvaluation& bar, const NoiseBundle& noise,
                                          const TimeGrid& grid, const SolverSettings& settings) {
    const ForwardPath fu = simulate_forward(spec, policy_u, noise, grid);
    const BsdeSolution su = solve_state_bsde(spec, fu, noise, grid, settings.basis);

    const std::size_t P = fu.paths(), N = grid.N, n = spec.n, m = spec.m, M = spec.num_marks(), K = spec.k;
    const CoefficientBundle& cb = spec.coefficients;
    const BackwardLayout lay = spec.backward_layout();
    const double dt = grid.dt;

    std::vector<double> lhs(P), rhs(P);
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        TrajectoryPoint loader(spec, bar.fwd, bar.state, bar.cost, grid);
        Hamiltonian H(spec);
        HamiltonianPoint pu = HamiltonianPoint::zeros(spec);
        Hamiltonian::Gradients g;
        std::vector<double> sarg(n + K), s2u(n), s2b(n), arg(lay.size());
        std::vector<double> Phi_x(n), phi_x(m * n), phi_u(m), phi_b(m), gamma_y(m);
        for (std::size_t p = b; p < e; ++p) {
            double L = 0.0, R = 0.0;
            for (std::size_t step = 0; step < N; ++step) {
                const double t = grid.t(step);
                const HamiltonianPoint& pb = loader.load(bar.adjoint, p, step);
                const double Hb = H.value(pb);
                H.gradients(pb, g);

                // Same adjoint slots, primal slots from the other control.
                pu = pb;
                TrajectoryPoint::copy(fu.x.row(p, step), pu.x);
                TrajectoryPoint::copy(su.y.row(p, step), pu.y);
                TrajectoryPoint::copy(su.z1.row(p, step), pu.z1);
                TrajectoryPoint::copy(su.z2.row(p, step), pu.z2);
                TrajectoryPoint::copy(su.Lambda.row(p, step), pu.Lambda);
                TrajectoryPoint::copy(fu.u.row(p, step), pu.u);
                const double Hu = H.value(pu);

                backward_arg(lay, bar.fwd, bar.state, p, step, arg);
                const double lb = cb.l.scalar(t, arg);
                backward_arg(lay, fu, su, p, step, arg);
                const double lu = cb.l.scalar(t, arg);

                std::copy(pb.x.begin(), pb.x.end(), sarg.begin());
                std::copy(pb.u.begin(), pb.u.end(), sarg.begin() + static_cast<std::ptrdiff_t>(n));
                cb.sigma2.eval(t, sarg, s2b);
                std::copy(pu.x.begin(), pu.x.end(), sarg.begin());
                std::copy(pu.u.begin(), pu.u.end(), sarg.begin() + static_cast<std::ptrdiff_t>(n));
                cb.sigma2.eval(t, sarg, s2u);

                const double rb = bar.fwd.rho(p, step), ru = fu.rho(p, step);
                const double dh = fu.h(p, step) - bar.fwd.h(p, step);
                double lin = Hu - Hb;
                for (std::size_t i = 0; i < n; ++i) lin -= g.x[i] * (pu.x[i] - pb.x[i]);
                for (std::size_t j = 0; j < m; ++j) {
                    lin -= g.y[j] * (pu.y[j] - pb.y[j]) + g.z1[j] * (pu.z1[j] - pb.z1[j]) +
                           g.z2[j] * (pu.z2[j] - pb.z2[j]);
                    lin -= (pu.z2[j] - pb.z2[j]) * dh * pb.k[j];
                }
                for (std::size_t c = 0; c < m * M; ++c) lin -= g.Lambda[c] * (pu.Lambda[c] - pb.Lambda[c]);
                for (std::size_t i = 0; i < n; ++i) lin -= (s2u[i] - s2b[i]) * dh * pb.p[i];

                R += (rb * lin + bar.cost.R2(p, step) * (ru - rb) * dh + (lu - lb) * (ru - rb)) * dt;
                L += (ru * lu - rb * lb) * dt;
            }
            // Terminal and initial remainders.
            const auto xb = bar.fwd.x.row(p, N), xu = fu.x.row(p, N);
            const double Phib = cb.Phi.scalar(grid.T, xb), Phiu = cb.Phi.scalar(grid.T, xu);
            cb.Phi.jac(grid.T, xb, Phi_x);
            cb.phi.jac(grid.T, xb, phi_x);
            cb.phi.eval(grid.T, xb, phi_b);
            cb.phi.eval(grid.T, xu, phi_u);
            const double rbN = bar.fwd.rho(p, N), ruN = fu.rho(p, N);
            double term = Phiu - Phib;
            for (std::size_t i = 0; i < n; ++i) term -= Phi_x[i] * (xu[i] - xb[i]);
            for (std::size_t j = 0; j < m; ++j) {
                const double kN = bar.adjoint.k(p, N, j);
                double lin_phi = phi_u[j] - phi_b[j];
                for (std::size_t i = 0; i < n; ++i) lin_phi -= phi_x[j * n + i] * (xu[i] - xb[i]);
                term -= lin_phi * kN;
            }
            R += rbN * term + (ruN - rbN) * (Phiu - Phib);
            L += ruN * Phiu - rbN * Phib;

            const auto yb = bar.state.y.row(p, 0), yu = su.y.row(p, 0);
            const double gb = cb.gamma.scalar(0.0, yb), gu = cb.gamma.scalar(0.0, yu);
            cb.gamma.jac(0.0, yb, gamma_y);
            double gterm = gu - gb;
            for (std::size_t j = 0; j < m; ++j) gterm -= gamma_y[j] * (yu[j] - yb[j]);
            R += gterm;
            L += gu - gb;
            lhs[p] = L;
            rhs[p] = R;
        }
    });
    DifferenceReport report;
    const MeanStderr l = mean_stderr(P, [&](std::size_t p) { return lhs[p]; });
    const MeanStderr g = mean_stderr(P, [&](std::size_t p) { return lhs[p] - rhs[p]; });
    report.lhs = l.mean;
    report.lhs_std_error = l.std_error;
    report.gap = g.mean;
    report.rhs = l.mean - g.mean;
    report.std_error = g.std_error;
    return report;
}

namespace {

// OLS slope of log(gap) on log(eps) over the nonzero gaps.
double loglog_slope(const std::vector<double>& eps, const std::vector<double>& gap) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(gap[i] > 0.0)) continue;
        const double x = std::log(eps[i]), y = std::log(gap[i]);
        sx += x, sy += y, sxx += x * x, sxy += x * y, cnt += 1;
    }
    if (cnt < 2) return 0.0;
    const double den = cnt * sxx - sx * sx;
    return den > 0.0 ? (cnt * sxy - sx * sy) / den : 0.0;
}

double sup_gap(const Tensor3& a, const Tensor3& b, std::size_t p) {
    double worst = 0.0;
    for (std::size_t step = 0; step < a.steps(); ++step) {
        const auto ra = a.row(p, step), rb = b.row(p, step);
        double s = 0.0;
        for (std::size_t i = 0; i < ra.size(); ++i) s += (ra[i] - rb[i]) * (ra[i] - rb[i]);
        worst = std::max(worst, s);
    }
    return std::sqrt(worst);
}

}  // namespace

PerturbationReport perturbation_order_check(const ProblemSpec& spec, const ControlPolicy& policy,
                                            const ControlPolicy& direction, const NoiseBundle& noise,
                                            const TimeGrid& grid, const std::vector<double>& eps_list,
                                            const BasisSpec& basis) {
    for (double eps : eps_list)
        if (!(eps > 0.0)) throw std::invalid_argument("perturbation sizes must be positive");
    const ForwardPath fb = simulate_forward(spec, policy, noise, grid);
    const BsdeSolution sb = solve_state_bsde(spec, fb, noise, grid, basis);
    const std::size_t P = fb.paths();
    const double n = static_cast<double>(P);

    PerturbationReport report;
    report.eps = eps_list;
    for (double eps : eps_list) {
        const ControlPolicy pe = ControlPolicy::blend(policy, direction, eps);
        const ForwardPath fe = simulate_forward(spec, pe, noise, grid);
        const BsdeSolution se = solve_state_bsde(spec, fe, noise, grid, basis);
        report.x_gap.push_back(ordered_sum(P, [&](std::size_t p) { return std::pow(sup_gap(fe.x, fb.x, p), 4); }) / n);
        report.y_gap.push_back(ordered_sum(P, [&](std::size_t p) { return std::pow(sup_gap(se.y, sb.y, p), 4); }) / n);
        report.rho_gap.push_back(
            ordered_sum(P, [&](std::size_t p) { return std::pow(sup_gap(fe.rho, fb.rho, p), 2); }) / n);
    }
    auto all_zero = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double g) { return g == 0.0; });
    };
    report.x_zero = all_zero(report.x_gap);
    report.y_zero = all_zero(report.y_gap);
    report.rho_zero = all_zero(report.rho_gap);
    report.x_slope = loglog_slope(eps_list, report.x_gap);
    report.y_slope = loglog_slope(eps_list, report.y_gap);
    report.rho_slope = loglog_slope(eps_list, report.rho_gap);
    return report;
}

void check_sufficient_structure(const ProblemSpec& spec, std::uint64_t seed) {
    const CoefficientBundle& cb = spec.coefficients;
    const std::size_t n = spec.n, K = spec.k, m = spec.m;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0), time(0.0, spec.T);
    auto sample_control = [&](std::vector<double>& arg) {
        for (std::size_t i = 0; i < n; ++i) arg[i] = 10.0 * unit(rng);
        for (std::size_t k = 0; k < K; ++k) {
            const double lo = std::max(spec.control.lower[k], -10.0), hi = std::min(spec.control.upper[k], 10.0);
            arg[n + k] = lo + (hi - lo) * 0.5 * (unit(rng) + 1.0);
        }
    };
    std::vector<double> a(n + K), b(n + K), jh(n + K);
    for (int s = 0; s < 50; ++s) {
        const double t = time(rng);
        sample_control(a);
        sample_control(b);
        cb.h.jac(t, a, jh);
        const double ha = cb.h.scalar(t, a), hb = cb.h.scalar(t, b);
        bool moves_x = false, moves_u = false;
        for (std::size_t i = 0; i < n; ++i) moves_x |= jh[i] != 0.0;
        for (std::size_t k = 0; k < K; ++k) moves_u |= jh[n + k] != 0.0;
        if (!moves_x && !moves_u && std::abs(ha - hb) > 1e-12 * (1.0 + std::abs(ha))) moves_x = true;
        if (moves_x) throw SpecError("sufficient condition needs h to depend on t only, but h depends on x");
        if (moves_u) throw SpecError("sufficient condition needs h to depend on t only, but h depends on u");
    }
    std::vector<double> x(n, 0.0), v(m), j0(m * n), j1(m * n);
    cb.phi.eval(spec.T, x, v);
    for (double e : v)
        if (std::abs(e) > 1e-12) throw SpecError("sufficient condition needs phi linear, but phi(0) != 0");
    cb.phi.jac(spec.T, x, j0);
    for (int s = 0; s < 50; ++s) {
        for (double& e : x) e = 10.0 * unit(rng);
        cb.phi.jac(spec.T, x, j1);
        cb.phi.eval(spec.T, x, v);
        for (std::size_t j = 0; j < m; ++j) {
            double lin = 0.0;
            for (std::size_t i = 0; i < n; ++i) lin += j0[j * n + i] * x[i];
            const bool same_jac = std::equal(j0.begin(), j0.end(), j1.begin(), [](double p, double q) {
                return std::abs(p - q) <= 1e-12 * (1.0 + std::abs(p));
            });
            if (!same_jac || std::abs(v[j] - lin) > 1e-9 * (1.0 + std::abs(lin)))
                throw SpecError("sufficient condition needs phi linear, but phi is not linear in x");
        }
    }
}

namespace {

std::vector<double>& block_of(HamiltonianPoint& pt, Wrt wrt) {
    switch (wrt) {
        case Wrt::x: return pt.x;
        case Wrt::y: return pt.y;
        case Wrt::z1: return pt.z1;
        case Wrt::z2: return pt.z2;
        case Wrt::Lambda: return pt.Lambda;
        case Wrt::u: break;
    }
    return pt.u;
}

bool midpoint_convex(double fa, double fb, double fm) {
    return fm <= 0.5 * (fa + fb) + 1e-9 * (1.0 + std::abs(fa) + std::abs(fb));
}

// Midpoint convexity of H along each block, then jointly, at sampled
// trajectory points with the adjoint slots held fixed.
void convexity_samples(const ProblemSpec& spec, const PolicyEvaluation& ev, const TimeGrid& grid,
                       const SufficientOptions& opt, SufficientCertificate& cert) {
    constexpr Wrt blocks[] = {Wrt::x, Wrt::y, Wrt::z1, Wrt::z2, Wrt::Lambda, Wrt::u};
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> path(0, ev.fwd.paths() - 1), step(0, grid.N - 1);
    TrajectoryPoint loader(spec, ev.fwd, ev.state, ev.cost, grid);
    Hamiltonian H(spec);
    const CoefficientBundle& cb = spec.coefficients;

    auto perturb = [&](HamiltonianPoint& pt, Wrt w) {
        auto& v = block_of(pt, w);
        for (double& e : v) e += opt.radius * unit(rng);
        if (w == Wrt::u) spec.control.project(v);
    };
    auto fail = [&](const std::string& what, std::size_t s) {
        if (!cert.convexity_pass) return;
        cert.convexity_pass = false;
        std::ostringstream os;
        os << what << " (sample " << s << ")";
        cert.convexity_failure = os.str();
    };

    for (std::size_t s = 0; s < opt.convexity_samples && cert.convexity_pass; ++s) {
        const HamiltonianPoint base = loader.load(ev.adjoint, path(rng), step(rng));
        auto test_pair = [&](std::span<const Wrt> which, const std::string& label) {
            HamiltonianPoint a = base, b = base, mid = base;
            for (Wrt v : which) {
                perturb(a, v);
                perturb(b, v);
                const auto &va = block_of(a, v), &vb = block_of(b, v);
                auto& vm = block_of(mid, v);
                for (std::size_t i = 0; i < vm.size(); ++i) vm[i] = 0.5 * (va[i] + vb[i]);
            }
            ++cert.convexity_checked;
            if (!midpoint_convex(H.value(a), H.value(b), H.value(mid))) fail("H along " + label, s);
        };
        for (const Wrt& w : blocks)
            if (block_size(spec, w) > 0) test_pair({&w, 1}, to_string(w));
        test_pair(blocks, "all blocks");
        // Terminal cost Phi and initial cost gamma.
        std::vector<double> xa(spec.n), xb(spec.n), xm(spec.n);
        const std::size_t p = path(rng);
        for (std::size_t i = 0; i < spec.n; ++i) {
            xa[i] = ev.fwd.x(p, grid.N, i) + opt.radius * unit(rng);
            xb[i] = ev.fwd.x(p, grid.N, i) + opt.radius * unit(rng);
            xm[i] = 0.5 * (xa[i] + xb[i]);
        }
        ++cert.convexity_checked;
        if (!midpoint_convex(cb.Phi.scalar(grid.T, xa), cb.Phi.scalar(grid.T, xb), cb.Phi.scalar(grid.T, xm)))
            fail("Phi", s);
        std::vector<double> ya(spec.m), yb(spec.m), ym(spec.m);
        for (std::size_t j = 0; j < spec.m; ++j) {
            ya[j] = ev.state.y(p, 0, j) + opt.radius * unit(rng);
            yb[j] = ev.state.y(p, 0, j) + opt.radius * unit(rng);
            ym[j] = 0.5 * (ya[j] + yb[j]);
        }
        ++cert.convexity_checked;
        if (!midpoint_convex(cb.gamma.scalar(0.0, ya), cb.gamma.scalar(0.0, yb), cb.gamma.scalar(0.0, ym)))
            fail("gamma", s);
    }
}

// Candidate controls: a uniform grid per component, other components at ubar.
std::vector<std::vector<double>> control_grid(const ProblemSpec& spec, const SufficientOptions& opt) {
    std::vector<std::vector<double>> grid(spec.k);
    for (std::size_t k = 0; k < spec.k; ++k) {
        const double lo = std::max(spec.control.lower[k], -opt.grid_half_width);
        const double hi = std::min(spec.control.upper[k], opt.grid_half_width);
        const std::size_t G = hi > lo ? std::max<std::size_t>(opt.grid_points, 2) : 1;
        for (std::size_t g = 0; g < G; ++g)
            grid[k].push_back(G == 1 ? lo : lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(G - 1));
    }
    return grid;
}

}  // namespace

SufficientCertificate sufficient_check(const ProblemSpec& spec, const PolicyEvaluation& ev, const TimeGrid& grid,
                                       const SolverSettings& settings, const SufficientOptions& options) {
    check_sufficient_structure(spec, options.seed);
    SufficientCertificate cert;
    convexity_samples(spec, ev, grid, options, cert);

    // E^ubar[H(v) - H(ubar) | G_n] by rho-weighted regression on the
    // observation features; its most negative value over the grid is the
    // minimization residual.
    const auto cgrid = control_grid(spec, options);
    std::size_t D = 0;
    for (const auto& g : cgrid) D += g.size();
    const std::size_t R = std::min(ev.fwd.paths(), options.regression_paths);
    const std::size_t E = std::min(R, settings.eval_paths), V = ev.fwd.features.comps() - 1;
    double residual = 0.0, pointwise = 0.0;
    std::vector<double> targets(R * D), weights(R);
    for (std::size_t step = 0; step < grid.N; ++step) {
        for_each_chunk(R, [&](std::size_t b, std::size_t e, std::size_t) {
            TrajectoryPoint loader(spec, ev.fwd, ev.state, ev.cost, grid);
            Hamiltonian H(spec);
            for (std::size_t p = b; p < e; ++p) {
                HamiltonianPoint& pt = loader.load(ev.adjoint, p, step);
                const double base = H.value(pt);
                std::size_t c = 0;
                for (std::size_t k = 0; k < spec.k; ++k) {
                    const double keep = pt.u[k];
                    for (double v : cgrid[k]) {
                        pt.u[k] = v;
                        targets[p * D + c++] = H.value(pt) - base;
                    }
                    pt.u[k] = keep;
                }
                weights[p] = ev.fwd.rho(p, step);
            }
        });
        const auto vars = observation_vars(ev.fwd.features, step, R);
        const Regression reg(vars, R, V, targets, D, options.projection, weights);
        const auto& fit = reg.fitted();
        double mean_gap = 0.0;
        for (std::size_t p = 0; p < E; ++p) {
            double gap = 0.0;
            for (std::size_t c = 0; c < D; ++c) gap = std::max(gap, -fit[p * D + c]);
            mean_gap += gap;
            pointwise = std::max(pointwise, gap);
        }
        residual = std::max(residual, mean_gap / static_cast<double>(E));
    }
    cert.minimization_residual = residual;
    cert.minimization_residual_max = pointwise;
    cert.minimization_pass = residual <= options.tol;
    return cert;
}

std::string OptimalityReport::to_json() const {
    nlohmann::ordered_json j;
    j["cost"] = cost.mean;
    j["cost_stderr"] = cost.std_error;
    j["directional_derivative"] = directional_derivative.mean;
    j["directional_derivative_stderr"] = directional_derivative.std_error;
    j["necessary_residual"] = necessary_residual;
    j["sufficient_applicable"] = sufficient.has_value();
    if (sufficient) {
        j["convexity_pass"] = sufficient->convexity_pass;
        j["convexity_checked"] = sufficient->convexity_checked;
        j["convexity_failure"] = sufficient->convexity_failure;
        j["minimization_residual"] = sufficient->minimization_residual;
        j["minimization_residual_max"] = sufficient->minimization_residual_max;
        j["minimization_pass"] = sufficient->minimization_pass;
        j["sufficient_pass"] = sufficient->passed();
    } else {
        j["sufficient_note"] = sufficient_note;
    }
    return j.dump(2);
}

OptimalityReport optimality_report(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                                   const TimeGrid& grid, const SolverSettings& settings,
                                   const SufficientOptions& sufficient) {
    const PolicyEvaluation ev = evaluate_policy_full(spec, policy, noise, grid, settings);
    OptimalityReport report;
    report.cost = ev.J;
    const GradientField field = conditional_projection(ev.Hu, ev.fwd.rho, ev.fwd.features, settings);
    report.necessary_residual = necessary_residual(spec, ev.fwd, field);
    if (policy.is_simple()) {
        const auto g = parameter_gradient(ev, policy);
        ControlPolicy descent = policy;
        const std::size_t block = policy.control_dim() * policy.feature_count();
        for (std::size_t step = 0; step < policy.steps(); ++step) {
            auto theta = descent.theta_block(step);
            for (std::size_t i = 0; i < block; ++i) theta[i] -= g[step * block + i];
        }
        report.directional_derivative = directional_derivative(ev, descent, grid);
    }
    bool applicable = true;
    try {
        check_sufficient_structure(spec, sufficient.seed);
    } catch (const SpecError& e) {
        applicable = false;
        report.sufficient_note = e.what();
    }
    if (applicable) report.sufficient = sufficient_check(spec, ev, grid, settings, sufficient);
    return report;
}

}  // namespace fbsde
