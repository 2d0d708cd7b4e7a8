#include "fbsde/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbsde/hamiltonian.hpp"
#include "fbsde/parallel.hpp"

namespace fbsde {

std::vector<double> regression_state(const ForwardPath& fwd, std::size_t step, const Tensor3* extra,
                                     std::size_t& vars) {
    const std::size_t P = fwd.paths(), n = fwd.x.comps();
    const std::size_t F = fwd.features.comps() - 1;
    const std::size_t E = extra ? extra->comps() : 0;
    vars = n + F + E;
    std::vector<double> out(P * vars);
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t p = b; p < e; ++p) {
            double* row = out.data() + p * vars;
            const auto x = fwd.x.row(p, step);
            std::copy(x.begin(), x.end(), row);
            const auto f = fwd.features.row(p, step);
            std::copy(f.begin() + 1, f.end(), row + n);
            if (extra) {
                const auto v = extra->row(p, step);
                std::copy(v.begin(), v.end(), row + n + F);
            }
        }
    });
    return out;
}

namespace {

// Conditional expectations of v_{n+1} and of its products with the step's
// increments: E[v], E[v dW]/dt, E[v dY]/dt, E[v dN~_e]/(nu_e dt).
struct IncrementFit {
    std::size_t d = 0, marks = 0;
    std::vector<double> fitted;  // [P x d(3+M)]
    std::vector<double> coefficients;
    double inv_dt = 0.0;
    std::vector<double> inv_mark;  // 1/(nu_e dt), 0 for empty marks

    double mean(std::size_t p, std::size_t j) const { return fitted[p * width() + j]; }
    double z1(std::size_t p, std::size_t j) const { return fitted[p * width() + d + j] * inv_dt; }
    double z2(std::size_t p, std::size_t j) const { return fitted[p * width() + 2 * d + j] * inv_dt; }
    double lambda(std::size_t p, std::size_t e, std::size_t j) const {
        return fitted[p * width() + (3 + e) * d + j] * inv_mark[e];
    }
    std::size_t width() const { return d * (3 + marks); }
};

IncrementFit increment_regression(std::span<const double> vars, std::size_t V, const Tensor3& next,
                                  std::size_t next_step, const NoiseBundle& noise, const TimeGrid& grid,
                                  const BasisSpec& basis) {
    const std::size_t P = next.paths(), d = next.comps(), M = noise.marks, step = next_step - 1;
    IncrementFit fit;
    fit.d = d;
    fit.marks = M;
    fit.inv_dt = 1.0 / grid.dt;
    for (double w : noise.mark_weights) fit.inv_mark.push_back(w > 0.0 ? 1.0 / (w * grid.dt) : 0.0);

    const std::size_t D = fit.width();
    std::vector<double> targets(P * D);
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t p = b; p < e; ++p) {
            double* row = targets.data() + p * D;
            const double dW = noise.dW(p, step), dY = noise.dY(p, step);
            for (std::size_t j = 0; j < d; ++j) {
                const double v = next(p, next_step, j);
                row[j] = v;
                row[d + j] = v * dW;
                row[2 * d + j] = v * dY;
                for (std::size_t m = 0; m < M; ++m) row[(3 + m) * d + j] = v * noise.compensated(p, step, m);
            }
        }
    });
    Regression reg(vars, P, V, targets, D, basis);
    fit.fitted = reg.fitted();
    fit.coefficients = reg.coefficients();
    return fit;
}

void check_inputs(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise, const TimeGrid& grid) {
    if (fwd.steps() != grid.N || noise.N != grid.N) throw std::invalid_argument("forward paths do not match the grid");
    if (fwd.paths() != noise.paths) throw std::invalid_argument("forward paths do not match the noise bundle");
    if (fwd.x.comps() != spec.n) throw std::invalid_argument("forward paths do not match the state dimension");
}

}  // namespace

BsdeSolution solve_state_bsde(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise,
                              const TimeGrid& grid, const BasisSpec& basis) {
    check_inputs(spec, fwd, noise, grid);
    const std::size_t P = fwd.paths(), N = grid.N, m = spec.m, M = spec.num_marks();
    const BackwardLayout lay = spec.backward_layout();
    const CoefficientBundle& cb = spec.coefficients;
    const double dt = grid.dt;

    BsdeSolution sol;
    sol.y = Tensor3(P, N + 1, m);
    sol.z1 = Tensor3(P, N, m);
    sol.z2 = Tensor3(P, N, m);
    sol.Lambda = Tensor3(P, N, m * M);
    sol.coefficients.resize(N);

    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t p = b; p < e; ++p) cb.phi.eval(grid.T, fwd.x.row(p, N), sol.y.row(p, N));
    });

    for (std::size_t step = N; step-- > 0;) {
        std::size_t V = 0;
        const auto vars = regression_state(fwd, step, nullptr, V);
        const IncrementFit fit = increment_regression(vars, V, sol.y, step + 1, noise, grid, basis);
        sol.coefficients[step] = fit.coefficients;
        const double t = grid.t(step);
        for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
            std::vector<double> arg(lay.size()), f(m);
            for (std::size_t p = b; p < e; ++p) {
                const auto x = fwd.x.row(p, step);
                std::copy(x.begin(), x.end(), arg.begin());
                for (std::size_t j = 0; j < m; ++j) {
                    arg[lay.y() + j] = fit.mean(p, j);
                    arg[lay.z1() + j] = sol.z1(p, step, j) = fit.z1(p, j);
                    arg[lay.z2() + j] = sol.z2(p, step, j) = fit.z2(p, j);
                    for (std::size_t mk = 0; mk < M; ++mk)
                        arg[lay.lambda() + mk * m + j] = sol.Lambda(p, step, mk * m + j) = fit.lambda(p, mk, j);
                }
                const auto u = fwd.u.row(p, step);
                std::copy(u.begin(), u.end(), arg.begin() + static_cast<std::ptrdiff_t>(lay.u()));
                cb.f.eval(t, arg, f);
                const double h = fwd.h(p, step);
                for (std::size_t j = 0; j < m; ++j)
                    sol.y(p, step, j) = fit.mean(p, j) - (f[j] - sol.z2(p, step, j) * h) * dt;
            }
        });
    }
    return sol;
}

namespace {

void fill_backward_arg(const BackwardLayout& lay, const ForwardPath& fwd, const BsdeSolution& state, std::size_t p,
                       std::size_t step, std::vector<double>& arg) {
    const std::size_t m = lay.m, M = lay.marks;
    const auto x = fwd.x.row(p, step);
    std::copy(x.begin(), x.end(), arg.begin());
    for (std::size_t j = 0; j < m; ++j) {
        arg[lay.y() + j] = state.y(p, step, j);
        arg[lay.z1() + j] = state.z1(p, step, j);
        arg[lay.z2() + j] = state.z2(p, step, j);
    }
    for (std::size_t c = 0; c < m * M; ++c) arg[lay.lambda() + c] = state.Lambda(p, step, c);
    const auto u = fwd.u.row(p, step);
    std::copy(u.begin(), u.end(), arg.begin() + static_cast<std::ptrdiff_t>(lay.u()));
}

}  // namespace

CostBsdeSolution solve_cost_bsde(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise,
                                 const BsdeSolution& state, const TimeGrid& grid, const BasisSpec& basis) {
    check_inputs(spec, fwd, noise, grid);
    const std::size_t P = fwd.paths(), N = grid.N, M = spec.num_marks();
    const BackwardLayout lay = spec.backward_layout();
    const CoefficientBundle& cb = spec.coefficients;
    const double dt = grid.dt;

    CostBsdeSolution sol;
    sol.r = Tensor3(P, N + 1, 1);
    sol.R1 = Tensor3(P, N, 1);
    sol.R2 = Tensor3(P, N, 1);
    sol.R3 = Tensor3(P, N, M);
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t p = b; p < e; ++p) sol.r(p, N) = cb.Phi.scalar(grid.T, fwd.x.row(p, N));
    });

    for (std::size_t step = N; step-- > 0;) {
        std::size_t V = 0;
        const auto vars = regression_state(fwd, step, nullptr, V);
        const IncrementFit fit = increment_regression(vars, V, sol.r, step + 1, noise, grid, basis);
        const double t = grid.t(step);
        for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
            std::vector<double> arg(lay.size());
            for (std::size_t p = b; p < e; ++p) {
                sol.R1(p, step) = fit.z1(p, 0);
                sol.R2(p, step) = fit.z2(p, 0);
                for (std::size_t mk = 0; mk < M; ++mk) sol.R3(p, step, mk) = fit.lambda(p, mk, 0);
                fill_backward_arg(lay, fwd, state, p, step, arg);
                const double l = cb.l.scalar(t, arg);
                sol.r(p, step) = fit.mean(p, 0) + (l + sol.R2(p, step) * fwd.h(p, step)) * dt;
            }
        });
    }
    return sol;
}

double AdjointSolution::R2adj(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                              const CostBsdeSolution& cost, const TimeGrid& grid, std::size_t path,
                              std::size_t step) const {
    const std::size_t n = spec.n, m = spec.m;
    std::vector<double> arg(n + spec.k), s2(n);
    const auto x = fwd.x.row(path, step);
    const auto u = fwd.u.row(path, step);
    std::copy(x.begin(), x.end(), arg.begin());
    std::copy(u.begin(), u.end(), arg.begin() + static_cast<std::ptrdiff_t>(n));
    spec.coefficients.sigma2.eval(grid.t(step), arg, s2);
    double v = cost.R2(path, step);
    for (std::size_t i = 0; i < n; ++i) v -= s2[i] * p_eval(path, step, i);
    for (std::size_t j = 0; j < m; ++j) v -= state.z2(path, step, j) * k(path, step, j);
    return v;
}

TrajectoryPoint::TrajectoryPoint(const ProblemSpec& spec, const ForwardPath& fwd, const BsdeSolution& state,
                                 const CostBsdeSolution& cost, const TimeGrid& grid)
    : spec_(spec), fwd_(fwd), state_(state), cost_(cost), grid_(grid), pt_(HamiltonianPoint::zeros(spec)),
      arg_(spec.n + spec.k), s2_(spec.n) {}

HamiltonianPoint& TrajectoryPoint::primal(std::size_t p, std::size_t step) {
    pt_.t = grid_.t(step);
    copy(fwd_.x.row(p, step), pt_.x);
    copy(state_.y.row(p, step), pt_.y);
    copy(state_.z1.row(p, step), pt_.z1);
    copy(state_.z2.row(p, step), pt_.z2);
    copy(state_.Lambda.row(p, step), pt_.Lambda);
    copy(fwd_.u.row(p, step), pt_.u);
    return pt_;
}

void TrajectoryPoint::set_R2adj(std::size_t p, std::size_t step) {
    const std::size_t n = spec_.n;
    std::copy(pt_.x.begin(), pt_.x.end(), arg_.begin());
    std::copy(pt_.u.begin(), pt_.u.end(), arg_.begin() + static_cast<std::ptrdiff_t>(n));
    spec_.coefficients.sigma2.eval(pt_.t, arg_, s2_);
    double v = cost_.R2(p, step);
    for (std::size_t i = 0; i < n; ++i) v -= s2_[i] * pt_.p[i];
    for (std::size_t j = 0; j < spec_.m; ++j) v -= pt_.z2[j] * pt_.k[j];
    pt_.R2adj = v;
}

HamiltonianPoint& TrajectoryPoint::load(const AdjointSolution& adj, std::size_t p, std::size_t step) {
    primal(p, step);
    copy(adj.p_eval.row(p, step), pt_.p);
    copy(adj.q1.row(p, step), pt_.q1);
    copy(adj.q2.row(p, step), pt_.q2);
    copy(adj.q3.row(p, step), pt_.q3);
    copy(adj.k.row(p, step), pt_.k);
    set_R2adj(p, step);
    return pt_;
}

void TrajectoryPoint::copy(std::span<const double> from, std::vector<double>& to) {
    std::copy(from.begin(), from.end(), to.begin());
}

namespace {

void forward_k(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise, const BsdeSolution& state,
               const CostBsdeSolution& cost, const TimeGrid& grid, AdjointSolution& adj, Tensor3& k) {
    const std::size_t P = fwd.paths(), N = grid.N, m = spec.m, M = spec.num_marks();
    const double dt = grid.dt;
    const CoefficientBundle& cb = spec.coefficients;
    const bool have_p = !adj.p_eval.empty();
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        TrajectoryPoint loader(spec, fwd, state, cost, grid);
        Hamiltonian H(spec);
        Hamiltonian::Gradients g;
        std::vector<double> gamma_y(m);
        for (std::size_t p = b; p < e; ++p) {
            cb.gamma.jac(0.0, state.y.row(p, 0), gamma_y);
            for (std::size_t j = 0; j < m; ++j) k(p, 0, j) = -gamma_y[j];
        }
        for (std::size_t step = 0; step < N; ++step) {
            for (std::size_t p = b; p < e; ++p) {
                HamiltonianPoint& pt = loader.primal(p, step);
                if (have_p) {
                    TrajectoryPoint::copy(adj.p_eval.row(p, step), pt.p);
                    TrajectoryPoint::copy(adj.q1.row(p, step), pt.q1);
                    TrajectoryPoint::copy(adj.q2.row(p, step), pt.q2);
                    TrajectoryPoint::copy(adj.q3.row(p, step), pt.q3);
                }
                TrajectoryPoint::copy(k.row(p, step), pt.k);
                loader.set_R2adj(p, step);
                H.gradients(pt, g);
                const double h = fwd.h(p, step), dW = noise.dW(p, step), dY = noise.dY(p, step);
                for (std::size_t j = 0; j < m; ++j) {
                    double v = pt.k[j] + (-g.y[j] + g.z2[j] * h) * dt - g.z1[j] * dW - g.z2[j] * dY;
                    for (std::size_t mk = 0; mk < M; ++mk) {
                        const double w = noise.mark_weights[mk];
                        if (w > 0.0) v -= g.Lambda[mk * m + j] / w * noise.compensated(p, step, mk);
                    }
                    k(p, step + 1, j) = v;
                }
            }
        }
    });
}

void backward_p(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise, const BsdeSolution& state,
                const CostBsdeSolution& cost, const TimeGrid& grid, const BasisSpec& basis, AdjointSolution& adj) {
    const std::size_t P = fwd.paths(), N = grid.N, n = spec.n, m = spec.m, M = spec.num_marks();
    const double dt = grid.dt;
    const CoefficientBundle& cb = spec.coefficients;
    if (adj.p.empty()) {
        adj.p = Tensor3(P, N + 1, n);
        adj.p_eval = Tensor3(P, N, n);
        adj.q1 = Tensor3(P, N, n);
        adj.q2 = Tensor3(P, N, n);
        adj.q3 = Tensor3(P, N, n * M);
    }
    for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
        std::vector<double> Phi_x(n), phi_x(m * n);
        for (std::size_t p = b; p < e; ++p) {
            const auto x = fwd.x.row(p, N);
            cb.Phi.jac(grid.T, x, Phi_x);
            cb.phi.jac(grid.T, x, phi_x);
            for (std::size_t i = 0; i < n; ++i) {
                double v = Phi_x[i];
                for (std::size_t j = 0; j < m; ++j) v -= phi_x[j * n + i] * adj.k(p, N, j);
                adj.p(p, N, i) = v;
            }
        }
    });

    for (std::size_t step = N; step-- > 0;) {
        std::size_t V = 0;
        const auto vars = regression_state(fwd, step, &adj.k, V);
        const IncrementFit fit = increment_regression(vars, V, adj.p, step + 1, noise, grid, basis);
        for_each_chunk(P, [&](std::size_t b, std::size_t e, std::size_t) {
            TrajectoryPoint loader(spec, fwd, state, cost, grid);
            Hamiltonian H(spec);
            std::vector<double> hx(n);
            for (std::size_t p = b; p < e; ++p) {
                HamiltonianPoint& pt = loader.primal(p, step);
                const double h = fwd.h(p, step);
                for (std::size_t i = 0; i < n; ++i) {
                    adj.q1(p, step, i) = pt.q1[i] = fit.z1(p, i);
                    adj.q2(p, step, i) = pt.q2[i] = fit.z2(p, i);
                    // Conditional expectation under the controlled measure: the
                    // density ratio over the step is 1 + h dY to first order.
                    adj.p_eval(p, step, i) = pt.p[i] = fit.mean(p, i) + pt.q2[i] * h * dt;
                    for (std::size_t mk = 0; mk < M; ++mk)
                        adj.q3(p, step, mk * n + i) = pt.q3[mk * n + i] = fit.lambda(p, mk, i);
                }
                TrajectoryPoint::copy(adj.k.row(p, step), pt.k);
                loader.set_R2adj(p, step);
                H.gradient(pt, Wrt::x, hx);
                for (std::size_t i = 0; i < n; ++i) adj.p(p, step, i) = pt.p[i] + hx[i] * dt;
            }
        });
    }
}

double sup_diff(const Tensor3& a, const Tensor3& b) {
    double s = 0.0;
    const auto& x = a.raw();
    const auto& y = b.raw();
    for (std::size_t i = 0; i < x.size(); ++i) s = std::max(s, std::abs(x[i] - y[i]));
    return s;
}

}  // namespace

AdjointSolution solve_adjoint(const ProblemSpec& spec, const ForwardPath& fwd, const NoiseBundle& noise,
                              const BsdeSolution& state, const CostBsdeSolution& cost, const TimeGrid& grid,
                              const BasisSpec& basis, const PicardOptions& picard) {
    check_inputs(spec, fwd, noise, grid);
    if (picard.max_sweeps == 0) throw ConvergenceError("adjoint iteration allows zero sweeps", {});
    const std::size_t P = fwd.paths(), N = grid.N, m = spec.m;

    AdjointSolution adj;
    // Initial guess: k frozen at its initial condition.
    Tensor3 k_prev(P, N + 1, m);
    {
        std::vector<double> gamma_y(m);
        for (std::size_t p = 0; p < P; ++p) {
            spec.coefficients.gamma.jac(0.0, state.y.row(p, 0), gamma_y);
            for (std::size_t step = 0; step <= N; ++step)
                for (std::size_t j = 0; j < m; ++j) k_prev(p, step, j) = -gamma_y[j];
        }
    }
    for (std::size_t sweep = 1; sweep <= picard.max_sweeps; ++sweep) {
        Tensor3 k(P, N + 1, m);
        forward_k(spec, fwd, noise, state, cost, grid, adj, k);
        const double residual = sup_diff(k, k_prev);
        adj.picard_residuals.push_back(residual);
        const bool stale = adj.p.empty() || residual > 0.0;
        adj.k = std::move(k);
        // p is a deterministic function of k, so it only needs recomputing
        // when k moved.
        if (stale) backward_p(spec, fwd, noise, state, cost, grid, basis, adj);
        if (residual <= picard.tol) return adj;
        k_prev = adj.k;
    }
    std::ostringstream os;
    os << "adjoint iteration did not converge in " << picard.max_sweeps << " sweeps; residuals:";
    for (double r : adj.picard_residuals) os << ' ' << r;
    throw ConvergenceError(os.str(), adj.picard_residuals);
}

}  // namespace fbsde
