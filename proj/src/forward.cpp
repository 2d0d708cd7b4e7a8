#include "fbsde/forward.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "fbsde/parallel.hpp"

namespace fbsde {

namespace {
constexpr std::size_t kMaxControlDim = 16;
}

ControlPolicy::ControlPolicy(ControlSet control, std::size_t steps, PolicyFeatures features)
    : control_(std::move(control)), steps_(steps), features_(features) {
    control_.validate();
    if (steps_ == 0) throw std::invalid_argument("policy needs at least one step");
    if (control_.dim() == 0 || control_.dim() > kMaxControlDim)
        throw std::invalid_argument("policy control dimension must be in [1, 16]");
    if (!(features_.clamp > 0.0)) throw std::invalid_argument("policy feature clamp must be positive");
    terms_.push_back({1.0, std::vector<double>(steps_ * control_.dim() * features_.count(), 0.0)});
}

namespace {
void require_simple(bool simple) {
    if (!simple) throw std::logic_error("coefficients are only addressable on a single-term policy");
}
}  // namespace

double& ControlPolicy::theta(std::size_t n, std::size_t k, std::size_t f) {
    require_simple(is_simple());
    return terms_[0].theta[(n * control_dim() + k) * feature_count() + f];
}

double ControlPolicy::theta(std::size_t n, std::size_t k, std::size_t f) const {
    require_simple(is_simple());
    return terms_[0].theta[(n * control_dim() + k) * feature_count() + f];
}

std::span<double> ControlPolicy::theta_block(std::size_t n) {
    require_simple(is_simple());
    const std::size_t block = control_dim() * feature_count();
    return {terms_[0].theta.data() + n * block, block};
}

std::span<const double> ControlPolicy::theta_block(std::size_t n) const {
    require_simple(is_simple());
    const std::size_t block = control_dim() * feature_count();
    return {terms_[0].theta.data() + n * block, block};
}

void ControlPolicy::fill_feature(std::size_t k, std::size_t f, double value) {
    for (std::size_t n = 0; n < steps_; ++n) theta(n, k, f) = value;
}

void ControlPolicy::feature_vector(double y_now, double y_avg, std::span<double> out) const {
    const double c = features_.clamp;
    std::size_t i = 0;
    out[i++] = 1.0;
    if (features_.current_y) out[i++] = std::clamp(y_now, -c, c);
    if (features_.running_average) out[i++] = std::clamp(y_avg, -c, c);
}

void ControlPolicy::evaluate(std::size_t n, std::span<const double> phi, std::span<double> u) const {
    const std::size_t K = control_dim(), F = feature_count();
    std::fill(u.begin(), u.end(), 0.0);
    double v[kMaxControlDim];
    for (const Term& term : terms_) {
        const double* th = term.theta.data() + n * K * F;
        for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (std::size_t f = 0; f < F; ++f) s += th[k * F + f] * phi[f];
            v[k] = std::clamp(s, control_.lower[k], control_.upper[k]);
        }
        for (std::size_t k = 0; k < K; ++k) u[k] += term.weight * v[k];
    }
    control_.project(u);
}

ControlPolicy ControlPolicy::blend(const ControlPolicy& a, const ControlPolicy& b, double eps) {
    if (!(a.control_ == b.control_) || a.steps_ != b.steps_ || !(a.features_ == b.features_))
        throw std::invalid_argument("blended policies must share control set, steps and features");
    // Mixing a policy with itself must not perturb it by rounding.
    if (a == b) return a;
    ControlPolicy out = a;
    out.terms_.clear();
    for (const Term& t : a.terms_) out.terms_.push_back({(1.0 - eps) * t.weight, t.theta});
    for (const Term& t : b.terms_) out.terms_.push_back({eps * t.weight, t.theta});
    return out;
}

std::vector<double> evaluate_policy(const ControlPolicy& policy, std::span<const double> y_history,
                                    std::size_t step) {
    if (step >= policy.steps()) throw std::out_of_range("policy step out of range");
    if (y_history.size() <= step) throw std::invalid_argument("observation history shorter than step + 1");
    double sum = 0.0;
    for (std::size_t j = 0; j <= step; ++j) sum += y_history[j];
    std::vector<double> phi(policy.feature_count()), u(policy.control_dim());
    policy.feature_vector(y_history[step], sum / static_cast<double>(step + 1), phi);
    policy.evaluate(step, phi, u);
    return u;
}

ForwardPath simulate_forward(const ProblemSpec& spec, const ControlPolicy& policy, const NoiseBundle& noise,
                             const TimeGrid& grid) {
    if (noise.N != grid.N) throw std::invalid_argument("noise bundle and time grid differ in step count");
    if (noise.marks != spec.num_marks() || noise.mark_weights != spec.marks.weights)
        throw std::invalid_argument("noise bundle was sampled for a different mark space");
    if (policy.steps() != grid.N) throw std::invalid_argument("policy step count differs from the grid");
    if (policy.control_dim() != spec.k) throw std::invalid_argument("policy control dimension differs from K");
    if (std::abs(noise.dt - grid.dt) > 1e-15 * grid.T) throw std::invalid_argument("noise dt differs from grid dt");

    const std::size_t P = noise.paths, N = grid.N, n = spec.n, K = spec.k, M = spec.num_marks();
    const std::size_t F = policy.feature_count();
    const double dt = grid.dt;
    const CoefficientBundle& cb = spec.coefficients;

    ForwardPath fwd;
    fwd.x = Tensor3(P, N + 1, n);
    fwd.Y = Tensor3(P, N + 1, 1);
    fwd.rho = Tensor3(P, N + 1, 1, 1.0);
    fwd.u = Tensor3(P, N, K);
    fwd.h = Tensor3(P, N, 1);
    fwd.features = Tensor3(P, N, F);

    for_each_chunk(P, [&](std::size_t begin, std::size_t end, std::size_t) {
        std::vector<double> arg(n + K), b(n), s1(n), s2(n), g(n * M), ysum(end - begin, 0.0);
        for (std::size_t p = begin; p < end; ++p)
            for (std::size_t i = 0; i < n; ++i) fwd.x(p, 0, i) = spec.x0[i];
        for (std::size_t step = 0; step < N; ++step) {
            const double t = grid.t(step);
            for (std::size_t p = begin; p < end; ++p) {
                const double Y = fwd.Y(p, step);
                ysum[p - begin] += Y;
                auto phi = fwd.features.row(p, step);
                policy.feature_vector(Y, ysum[p - begin] / static_cast<double>(step + 1), phi);
                auto u = fwd.u.row(p, step);
                policy.evaluate(step, phi, u);

                const auto x = fwd.x.row(p, step);
                std::copy(x.begin(), x.end(), arg.begin());
                std::copy(u.begin(), u.end(), arg.begin() + static_cast<std::ptrdiff_t>(n));
                cb.b.eval(t, arg, b);
                cb.sigma1.eval(t, arg, s1);
                cb.sigma2.eval(t, arg, s2);
                if (M > 0) cb.g.eval(t, arg, g);
                const double h = cb.h.scalar(t, arg);
                fwd.h(p, step) = h;

                const double dW = noise.dW(p, step), dY = noise.dY(p, step);
                auto xn = fwd.x.row(p, step + 1);
                bool finite = std::isfinite(h);
                for (std::size_t i = 0; i < n; ++i) {
                    double v = x[i] + (b[i] - s2[i] * h) * dt + s1[i] * dW + s2[i] * dY;
                    for (std::size_t e = 0; e < M; ++e) v += g[e * n + i] * noise.compensated(p, step, e);
                    xn[i] = v;
                    finite = finite && std::isfinite(v);
                }
                const double rho = fwd.rho(p, step) * std::exp(h * dY - 0.5 * h * h * dt);
                fwd.rho(p, step + 1) = rho;
                fwd.Y(p, step + 1) = Y + dY;
                if (!finite || !std::isfinite(rho) || !(rho > 0.0)) {
                    std::ostringstream os;
                    os << "non-finite forward state on path " << p << " at step " << step + 1;
                    throw NumericalError(os.str());
                }
            }
        }
    });
    return fwd;
}

void write_paths_csv(std::ostream& os, const ForwardPath& fwd, const TimeGrid& grid, std::size_t max_paths) {
    const std::size_t n = fwd.x.comps(), K = fwd.u.comps();
    os << "path,step,t";
    for (std::size_t i = 0; i < n; ++i) os << ",x" << i;
    os << ",Y,rho";
    for (std::size_t k = 0; k < K; ++k) os << ",u" << k;
    os << '\n';
    const std::size_t P = std::min(max_paths, fwd.paths());
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t step = 0; step <= grid.N; ++step) {
            os << p << ',' << step << ',' << grid.t(step);
            for (std::size_t i = 0; i < n; ++i) os << ',' << fwd.x(p, step, i);
            os << ',' << fwd.Y(p, step) << ',' << fwd.rho(p, step);
            // No control is applied at the terminal node.
            for (std::size_t k = 0; k < K; ++k) {
                os << ',';
                if (step < grid.N) os << fwd.u(p, step, k);
            }
            os << '\n';
        }
    }
}

}  // namespace fbsde
