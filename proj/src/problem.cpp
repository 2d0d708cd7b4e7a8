#include "fbsde/problem.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace fbsde {

double MarkSpace::total_mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

void MarkSpace::validate() const {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
            throw SpecError("mark weight " + std::to_string(i) + " must be finite and >= 0");
    }
}

bool ControlSet::bounded() const {
    for (std::size_t i = 0; i < dim(); ++i)
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) return false;
    return true;
}

void ControlSet::project(std::span<double> u) const {
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i], lower[i], upper[i]);
}

bool ControlSet::contains(std::span<const double> u) const {
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u[i] < lower[i] || u[i] > upper[i]) return false;
    return true;
}

void ControlSet::validate() const {
    if (lower.size() != upper.size()) throw SpecError("control set bounds differ in length");
    for (std::size_t i = 0; i < dim(); ++i)
        if (!(lower[i] <= upper[i]))
            throw SpecError("control set component " + std::to_string(i) + " has lower > upper");
}

ControlSet ControlSet::unbounded(std::size_t dim) {
    const double inf = std::numeric_limits<double>::infinity();
    return {std::vector<double>(dim, -inf), std::vector<double>(dim, inf)};
}

void Coefficient::eval(double t, std::span<const double> arg, std::span<double> out) const {
    value(t, arg, out);
}

void Coefficient::jac(double t, std::span<const double> arg, std::span<double> out) const {
    jacobian(t, arg, out);
}

double Coefficient::scalar(double t, std::span<const double> arg) const {
    double out = 0.0;
    value(t, arg, {&out, 1});
    return out;
}

std::vector<const Coefficient*> CoefficientBundle::all() const {
    return {&b, &sigma1, &sigma2, &g, &h, &f, &l, &phi, &Phi, &gamma};
}

void ProblemSpec::check_dimensions() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw SpecError("horizon T must be positive and finite");
    if (n == 0 || m == 0 || k == 0) throw SpecError("dimensions n, m, K must be >= 1");
    if (x0.size() != n) throw SpecError("x0 has length " + std::to_string(x0.size()) + ", expected n");
    marks.validate();
    control.validate();
    if (control.dim() != k) throw SpecError("control set dimension differs from K");

    const std::size_t mk = marks.size();
    const std::size_t state_in = n + k;
    const std::size_t back_in = backward_layout().size();
    struct Expect {
        const Coefficient* c;
        const char* role;
        std::size_t in, out;
    };
    const CoefficientBundle& cb = coefficients;
    const Expect expected[] = {
        {&cb.b, "b", state_in, n},          {&cb.sigma1, "sigma1", state_in, n},
        {&cb.sigma2, "sigma2", state_in, n}, {&cb.g, "g", state_in, n * mk},
        {&cb.h, "h", state_in, 1},          {&cb.f, "f", back_in, m},
        {&cb.l, "l", back_in, 1},           {&cb.phi, "phi", n, m},
        {&cb.Phi, "Phi", n, 1},             {&cb.gamma, "gamma", m, 1},
    };
    for (const auto& e : expected) {
        if (!e.c->value || !e.c->jacobian)
            throw SpecError(std::string("evaluator '") + e.role + "' is missing a value or jacobian");
        if (e.c->in_dim != e.in || e.c->out_dim != e.out) {
            std::ostringstream os;
            os << "dimension mismatch in evaluator '" << e.role << "': declared " << e.c->in_dim << " -> "
               << e.c->out_dim << ", expected " << e.in << " -> " << e.out;
            throw SpecError(os.str());
        }
    }
}

bool ValidationReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::vector<const ValidationCheck*> ValidationReport::failures() const {
    std::vector<const ValidationCheck*> out;
    for (const auto& c : checks)
        if (!c.passed) out.push_back(&c);
    return out;
}

namespace {

struct SamplePoint {
    double t = 0.0;
    std::vector<double> state_arg;     // [x, u]
    std::vector<double> backward_arg;  // [x, y, z1, z2, Lambda, u]
    std::vector<double> x, y;
};

class PointSampler {
public:
    PointSampler(const ProblemSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

    SamplePoint draw(double radius) {
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        std::uniform_real_distribution<double> time(0.0, spec_.T);
        const BackwardLayout lay = spec_.backward_layout();
        SamplePoint p;
        p.t = time(rng_);
        p.backward_arg.resize(lay.size());
        for (std::size_t i = 0; i < lay.u(); ++i) p.backward_arg[i] = radius * unit(rng_);
        std::vector<double> u(spec_.k);
        for (std::size_t i = 0; i < spec_.k; ++i) {
            const double lo = std::max(spec_.control.lower[i], -radius);
            const double hi = std::min(spec_.control.upper[i], radius);
            u[i] = lo + (hi - lo) * 0.5 * (unit(rng_) + 1.0);
        }
        std::copy(u.begin(), u.end(), p.backward_arg.begin() + static_cast<std::ptrdiff_t>(lay.u()));
        p.x.assign(p.backward_arg.begin(), p.backward_arg.begin() + static_cast<std::ptrdiff_t>(spec_.n));
        p.y.assign(p.backward_arg.begin() + static_cast<std::ptrdiff_t>(lay.y()),
                   p.backward_arg.begin() + static_cast<std::ptrdiff_t>(lay.y() + spec_.m));
        p.state_arg = p.x;
        p.state_arg.insert(p.state_arg.end(), u.begin(), u.end());
        return p;
    }

private:
    const ProblemSpec& spec_;
    std::mt19937_64 rng_;
};

std::span<const double> arg_for(const Coefficient& c, const ProblemSpec& spec, const SamplePoint& p) {
    const CoefficientBundle& cb = spec.coefficients;
    if (&c == &cb.f || &c == &cb.l) return p.backward_arg;
    if (&c == &cb.phi || &c == &cb.Phi) return p.x;
    if (&c == &cb.gamma) return p.y;
    return p.state_arg;
}

std::string point_string(const SamplePoint& p, std::span<const double> arg) {
    std::ostringstream os;
    os << "t=" << p.t << " arg=[";
    for (std::size_t i = 0; i < arg.size(); ++i) os << (i ? "," : "") << arg[i];
    os << "]";
    return os.str();
}

void require_finite(const Coefficient& c, std::span<const double> vals, const SamplePoint& p,
                    std::span<const double> arg, const char* what) {
    for (double v : vals)
        if (!std::isfinite(v))
            throw SpecError("non-finite " + std::string(what) + " from evaluator '" + c.name + "' at " +
                            point_string(p, arg));
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

ValidationReport validate_spec(const ProblemSpec& spec, std::size_t samples, std::uint64_t seed,
                               const ValidationOptions& options) {
    if (samples < 1) throw SpecError("validate_spec needs samples >= 1");
    ValidationReport report;
    spec.check_dimensions();
    report.checks.push_back({"dimensions", true, 0.0, {}, ""});

    const CoefficientBundle& cb = spec.coefficients;
    const auto coeffs = cb.all();
    PointSampler sampler(spec, seed);

    std::vector<ValidationCheck> deriv(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) deriv[i].name = coeffs[i]->name + " derivative";

    // Boundedness: compare the supremum on the sampling box with the
    // supremum on a box ten times larger. Bounded maps do not grow.
    struct GrowthCheck {
        const Coefficient* c;
        bool derivative;
        double near = 0.0, far = 0.0;
        std::vector<double> far_point;
    };
    std::vector<GrowthCheck> growth;
    for (const auto& [c, derivative] : {std::pair{&cb.h, false}, {&cb.sigma2, false}, {&cb.b, true},
                                        {&cb.sigma1, true}, {&cb.sigma2, true}, {&cb.h, true}, {&cb.g, true},
                                        {&cb.f, true}, {&cb.phi, true}})
        growth.push_back({c, derivative, 0.0, 0.0, {}});

    std::vector<double> out, jac, jac_fd, plus, minus;
    for (std::size_t s = 0; s < samples; ++s) {
        const SamplePoint p = sampler.draw(options.radius);
        const SamplePoint far = sampler.draw(10.0 * options.radius);
        for (std::size_t ci = 0; ci < coeffs.size(); ++ci) {
            const Coefficient& c = *coeffs[ci];
            const auto arg = arg_for(c, spec, p);
            out.assign(c.out_dim, 0.0);
            jac.assign(c.out_dim * c.in_dim, 0.0);
            c.eval(p.t, arg, out);
            require_finite(c, out, p, arg, "value");
            c.jac(p.t, arg, jac);
            require_finite(c, jac, p, arg, "jacobian");

            std::vector<double> a(arg.begin(), arg.end());
            plus.assign(c.out_dim, 0.0);
            minus.assign(c.out_dim, 0.0);
            for (std::size_t j = 0; j < c.in_dim; ++j) {
                const double h = 1e-5 * std::max(1.0, std::abs(a[j]));
                const double keep = a[j];
                a[j] = keep + h;
                c.eval(p.t, a, plus);
                a[j] = keep - h;
                c.eval(p.t, a, minus);
                a[j] = keep;
                for (std::size_t i = 0; i < c.out_dim; ++i) {
                    const double fd = (plus[i] - minus[i]) / (2.0 * h);
                    const double an = jac[i * c.in_dim + j];
                    const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
                    if (err > deriv[ci].worst_value) {
                        deriv[ci].worst_value = err;
                        deriv[ci].worst_point = a;
                    }
                }
            }
        }
        for (auto& gc : growth) {
            for (const SamplePoint* q : {&p, &far}) {
                const auto arg = arg_for(*gc.c, spec, *q);
                std::vector<double> v(gc.derivative ? gc.c->out_dim * gc.c->in_dim : gc.c->out_dim);
                if (gc.derivative)
                    gc.c->jac(q->t, arg, v);
                else
                    gc.c->eval(q->t, arg, v);
                require_finite(*gc.c, v, *q, arg, gc.derivative ? "jacobian" : "value");
                const double mag = max_abs(v);
                if (q == &p) {
                    gc.near = std::max(gc.near, mag);
                } else if (mag > gc.far) {
                    gc.far = mag;
                    gc.far_point.assign(arg.begin(), arg.end());
                }
            }
        }
    }

    for (auto& d : deriv) {
        d.passed = d.worst_value <= options.derivative_rtol;
        if (!d.passed) d.detail = "analytic derivative disagrees with central differences";
        report.checks.push_back(std::move(d));
    }
    for (const auto& gc : growth) {
        ValidationCheck c;
        c.name = gc.c->name + (gc.derivative ? " derivative bounded" : " bounded");
        c.worst_value = gc.far;
        c.worst_point = gc.far_point;
        c.passed = gc.far <= options.growth_factor * gc.near + 1e-12;
        if (!c.passed) {
            std::ostringstream os;
            os << "sup grows from " << gc.near << " to " << gc.far << " when the sampling box is scaled by 10";
            c.detail = os.str();
        }
        report.checks.push_back(std::move(c));
    }
    return report;
}

namespace {

Coefficient make(std::string name, std::size_t in, std::size_t out, Coefficient::Fn value, Coefficient::Fn jac) {
    return {std::move(name), in, out, std::move(value), std::move(jac)};
}

void zero(std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); }

}  // namespace

ProblemSpec builtin_lq_problem(const LqParams& p) {
    if (p.qx < 0.0 || p.qu < 0.0 || p.wT < 0.0) throw SpecError("LQ cost weights qx, qu, wT must be >= 0");
    if (p.intensity < 0.0) throw SpecError("LQ jump intensity must be >= 0");
    if (!(p.T > 0.0)) throw SpecError("LQ horizon T must be positive");
    if (!(p.u_lower <= p.u_upper)) throw SpecError("LQ control bounds must satisfy lower <= upper");

    ProblemSpec spec;
    spec.name = "lq";
    spec.n = spec.m = spec.k = 1;
    spec.T = p.T;
    spec.x0 = {p.x0};
    spec.marks.weights = {p.intensity};
    spec.control = {{p.u_lower}, {p.u_upper}};

    const std::size_t sdim = 2;  // [x, u]
    const std::size_t bdim = spec.backward_layout().size();
    const std::size_t bu = spec.backward_layout().u();
    CoefficientBundle& cb = spec.coefficients;

    cb.b = make("b", sdim, 1,
                [a = p.a](double, auto arg, auto out) { out[0] = a * arg[0] + arg[1]; },
                [a = p.a](double, auto, auto jac) {
                    jac[0] = a;
                    jac[1] = 1.0;
                });
    cb.sigma1 = make("sigma1", sdim, 1, [c = p.c1](double, auto, auto out) { out[0] = c; },
                     [](double, auto, auto jac) { zero(jac); });
    cb.sigma2 = make("sigma2", sdim, 1, [c = p.c2](double, auto, auto out) { out[0] = c; },
                     [](double, auto, auto jac) { zero(jac); });
    cb.g = make("g", sdim, 1, [j = p.jump_size](double, auto, auto out) { out[0] = j; },
                [](double, auto, auto jac) { zero(jac); });
    cb.h = make("h", sdim, 1,
                [h0 = p.h0, hg = p.h_gain](double, auto arg, auto out) { out[0] = h0 + hg * std::tanh(arg[0]); },
                [hg = p.h_gain](double, auto arg, auto jac) {
                    const double th = std::tanh(arg[0]);
                    jac[0] = hg * (1.0 - th * th);
                    jac[1] = 0.0;
                });
    cb.f = make("f", bdim, 1, [](double, auto, auto out) { out[0] = 0.0; },
                [](double, auto, auto jac) { zero(jac); });
    cb.l = make("l", bdim, 1,
                [qx = p.qx, qu = p.qu, bu](double, auto arg, auto out) {
                    out[0] = 0.5 * (qx * arg[0] * arg[0] + qu * arg[bu] * arg[bu]);
                },
                [qx = p.qx, qu = p.qu, bu](double, auto arg, auto jac) {
                    zero(jac);
                    jac[0] = qx * arg[0];
                    jac[bu] = qu * arg[bu];
                });
    cb.phi = make("phi", 1, 1, [c = p.phi0](double, auto arg, auto out) { out[0] = c * arg[0]; },
                  [c = p.phi0](double, auto, auto jac) { jac[0] = c; });
    cb.Phi = make("Phi", 1, 1, [w = p.wT](double, auto arg, auto out) { out[0] = 0.5 * w * arg[0] * arg[0]; },
                  [w = p.wT](double, auto arg, auto jac) { jac[0] = w * arg[0]; });
    cb.gamma = make("gamma", 1, 1, [](double, auto, auto out) { out[0] = 0.0; },
                    [](double, auto, auto jac) { jac[0] = 0.0; });
    spec.check_dimensions();
    return spec;
}

}  // namespace fbsde
