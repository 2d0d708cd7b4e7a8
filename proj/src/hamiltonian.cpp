#include "fbsde/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fbsde {

HamiltonianPoint HamiltonianPoint::zeros(const ProblemSpec& spec) {
    const std::size_t n = spec.n, m = spec.m, M = spec.num_marks();
    HamiltonianPoint pt;
    pt.x.assign(n, 0.0);
    pt.y.assign(m, 0.0);
    pt.z1.assign(m, 0.0);
    pt.z2.assign(m, 0.0);
    pt.Lambda.assign(m * M, 0.0);
    pt.u.assign(spec.k, 0.0);
    pt.p.assign(n, 0.0);
    pt.q1.assign(n, 0.0);
    pt.q2.assign(n, 0.0);
    pt.q3.assign(n * M, 0.0);
    pt.k.assign(m, 0.0);
    return pt;
}

const char* to_string(Wrt wrt) {
    switch (wrt) {
        case Wrt::x: return "x";
        case Wrt::y: return "y";
        case Wrt::z1: return "z1";
        case Wrt::z2: return "z2";
        case Wrt::Lambda: return "Lambda";
        case Wrt::u: return "u";
    }
    return "?";
}

std::size_t block_size(const ProblemSpec& spec, Wrt wrt) {
    switch (wrt) {
        case Wrt::x: return spec.n;
        case Wrt::y:
        case Wrt::z1:
        case Wrt::z2: return spec.m;
        case Wrt::Lambda: return spec.m * spec.num_marks();
        case Wrt::u: return spec.k;
    }
    return 0;
}

Hamiltonian::Hamiltonian(const ProblemSpec& spec) : spec_(spec), lay_(spec.backward_layout()) {
    const std::size_t n = spec.n, m = spec.m, K = spec.k, M = spec.num_marks();
    const std::size_t sd = n + K, bd = lay_.size();
    sarg_.resize(sd);
    barg_.resize(bd);
    b_.resize(n);
    s1_.resize(n);
    s2_.resize(n);
    g_.resize(n * M);
    f_.resize(m);
    jb_.resize(n * sd);
    js1_.resize(n * sd);
    js2_.resize(n * sd);
    jg_.resize(n * M * sd);
    jh_.resize(sd);
    jf_.resize(m * bd);
    jl_.resize(bd);
}

void Hamiltonian::load(const HamiltonianPoint& pt) {
    const std::size_t n = spec_.n;
    std::copy(pt.x.begin(), pt.x.end(), sarg_.begin());
    std::copy(pt.u.begin(), pt.u.end(), sarg_.begin() + static_cast<std::ptrdiff_t>(n));
    auto put = [&](const std::vector<double>& v, std::size_t off) {
        std::copy(v.begin(), v.end(), barg_.begin() + static_cast<std::ptrdiff_t>(off));
    };
    put(pt.x, lay_.x());
    put(pt.y, lay_.y());
    put(pt.z1, lay_.z1());
    put(pt.z2, lay_.z2());
    put(pt.Lambda, lay_.lambda());
    put(pt.u, lay_.u());
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw SpecError(std::string("non-finite Hamiltonian contribution from ") + what);
}

}  // namespace

double Hamiltonian::value(const HamiltonianPoint& pt) {
    load(pt);
    const CoefficientBundle& cb = spec_.coefficients;
    const std::size_t n = spec_.n, M = spec_.num_marks();
    const double t = pt.t;

    const double l = cb.l.scalar(t, barg_);
    require_finite(l, "l");
    cb.b.eval(t, sarg_, b_);
    cb.sigma1.eval(t, sarg_, s1_);
    cb.sigma2.eval(t, sarg_, s2_);
    if (M > 0) cb.g.eval(t, sarg_, g_);
    cb.f.eval(t, barg_, f_);
    const double h = cb.h.scalar(t, sarg_);

    double jump = 0.0;
    for (std::size_t e = 0; e < M; ++e) {
        const std::span<const double> ge(g_.data() + e * n, n), qe(pt.q3.data() + e * n, n);
        jump += dot(ge, qe) * spec_.marks.weights[e];
    }
    const double H = l + dot(b_, pt.p) + dot(s1_, pt.q1) + dot(s2_, pt.q2) + jump + dot(f_, pt.k) + pt.R2adj * h;
    require_finite(H, "the coefficient bundle");
    return H;
}

void Hamiltonian::gradient(const HamiltonianPoint& pt, Wrt wrt, std::span<double> out) {
    load(pt);
    const CoefficientBundle& cb = spec_.coefficients;
    const double t = pt.t;
    cb.l.jac(t, barg_, jl_);
    cb.f.jac(t, barg_, jf_);
    if (wrt == Wrt::x || wrt == Wrt::u) state_jacobians(t);
    block(pt, wrt, out);
}

void Hamiltonian::gradients(const HamiltonianPoint& pt, Gradients& out) {
    load(pt);
    const CoefficientBundle& cb = spec_.coefficients;
    const double t = pt.t;
    cb.l.jac(t, barg_, jl_);
    cb.f.jac(t, barg_, jf_);
    state_jacobians(t);
    const std::pair<Wrt, std::vector<double>*> blocks[] = {{Wrt::x, &out.x},   {Wrt::y, &out.y},
                                                           {Wrt::z1, &out.z1}, {Wrt::z2, &out.z2},
                                                           {Wrt::Lambda, &out.Lambda}, {Wrt::u, &out.u}};
    for (const auto& [w, v] : blocks) {
        v->resize(block_size(spec_, w));
        block(pt, w, *v);
    }
}

void Hamiltonian::state_jacobians(double t) {
    const CoefficientBundle& cb = spec_.coefficients;
    cb.b.jac(t, sarg_, jb_);
    cb.sigma1.jac(t, sarg_, js1_);
    cb.sigma2.jac(t, sarg_, js2_);
    if (spec_.num_marks() > 0) cb.g.jac(t, sarg_, jg_);
    cb.h.jac(t, sarg_, jh_);
}

// Assembles one block from the Jacobians already held in the scratch buffers.
void Hamiltonian::block(const HamiltonianPoint& pt, Wrt wrt, std::span<double> out) {
    const std::size_t n = spec_.n, m = spec_.m, K = spec_.k, M = spec_.num_marks();
    const std::size_t sd = n + K, bd = lay_.size();

    std::size_t boff = 0, width = 0;
    switch (wrt) {
        case Wrt::x: boff = lay_.x(), width = n; break;
        case Wrt::y: boff = lay_.y(), width = m; break;
        case Wrt::z1: boff = lay_.z1(), width = m; break;
        case Wrt::z2: boff = lay_.z2(), width = m; break;
        case Wrt::Lambda: boff = lay_.lambda(), width = m * M; break;
        case Wrt::u: boff = lay_.u(), width = K; break;
    }
    // Terms through l and f.
    for (std::size_t j = 0; j < width; ++j) {
        double s = jl_[boff + j];
        for (std::size_t i = 0; i < m; ++i) s += jf_[i * bd + boff + j] * pt.k[i];
        out[j] = s;
    }
    if (wrt != Wrt::x && wrt != Wrt::u) {
        for (std::size_t j = 0; j < width; ++j) require_finite(out[j], "l or f derivatives");
        return;
    }

    // Terms through the state coefficients, which depend on [x, u].
    const std::size_t soff = wrt == Wrt::x ? 0 : n;
    for (std::size_t j = 0; j < width; ++j) {
        const std::size_t c = soff + j;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += jb_[i * sd + c] * pt.p[i] + js1_[i * sd + c] * pt.q1[i] + js2_[i * sd + c] * pt.q2[i];
        for (std::size_t e = 0; e < M; ++e) {
            double se = 0.0;
            for (std::size_t i = 0; i < n; ++i) se += jg_[(e * n + i) * sd + c] * pt.q3[e * n + i];
            s += se * spec_.marks.weights[e];
        }
        s += pt.R2adj * jh_[c];
        out[j] += s;
        require_finite(out[j], "coefficient derivatives");
    }
}

double eval_H(const ProblemSpec& spec, const HamiltonianPoint& pt) { return Hamiltonian(spec).value(pt); }

std::vector<double> grad_H(const ProblemSpec& spec, const HamiltonianPoint& pt, Wrt wrt) {
    std::vector<double> out(block_size(spec, wrt));
    Hamiltonian(spec).gradient(pt, wrt, out);
    return out;
}

namespace {

std::vector<double>& block(HamiltonianPoint& pt, Wrt wrt) {
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

constexpr Wrt kAllBlocks[] = {Wrt::x, Wrt::y, Wrt::z1, Wrt::z2, Wrt::Lambda, Wrt::u};

}  // namespace

FiniteDiffReport finite_diff_check(const ProblemSpec& spec, std::span<const HamiltonianPoint> pts, double tol) {
    FiniteDiffReport report;
    Hamiltonian H(spec);
    std::vector<double> an;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        HamiltonianPoint pt = pts[i];
        for (Wrt w : kAllBlocks) {
            an.assign(block_size(spec, w), 0.0);
            H.gradient(pt, w, an);
            auto& v = block(pt, w);
            for (std::size_t j = 0; j < v.size(); ++j) {
                const double keep = v[j];
                const double step = 1e-5 * std::max(1.0, std::abs(keep));
                v[j] = keep + step;
                const double hp = H.value(pt);
                v[j] = keep - step;
                const double hm = H.value(pt);
                v[j] = keep;
                const double fd = (hp - hm) / (2.0 * step);
                const double err = std::abs(fd - an[j]) / std::max({1.0, std::abs(fd), std::abs(an[j])});
                if (report.worst_block.empty() || err > report.max_rel_error) {
                    report.max_rel_error = err;
                    report.worst_point = i;
                    report.worst_block = to_string(w);
                    report.worst_index = j;
                }
            }
        }
    }
    report.passed = report.max_rel_error < tol;
    return report;
}

std::vector<HamiltonianPoint> random_points(const ProblemSpec& spec, std::size_t count, std::uint64_t seed,
                                            double radius) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0), time(0.0, spec.T);
    std::vector<HamiltonianPoint> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        HamiltonianPoint pt = HamiltonianPoint::zeros(spec);
        pt.t = time(rng);
        for (auto* v : {&pt.x, &pt.y, &pt.z1, &pt.z2, &pt.Lambda, &pt.p, &pt.q1, &pt.q2, &pt.q3, &pt.k})
            for (double& e : *v) e = radius * unit(rng);
        for (std::size_t i = 0; i < spec.k; ++i) {
            const double lo = std::max(spec.control.lower[i], -radius);
            const double hi = std::min(spec.control.upper[i], radius);
            pt.u[i] = lo + (hi - lo) * 0.5 * (unit(rng) + 1.0);
        }
        pt.R2adj = radius * unit(rng);
        out.push_back(std::move(pt));
    }
    return out;
}

}  // namespace fbsde
