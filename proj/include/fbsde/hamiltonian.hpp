#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fbsde/problem.hpp"

namespace fbsde {

/// A point at which the Hamiltonian is evaluated. Lambda and q3 are
/// mark-major (block i belongs to mark e_i). R2adj is the substituted last
/// argument R2 - sigma2^T p - z2^T k, supplied by the caller.
struct HamiltonianPoint {
    double t = 0.0;
    std::vector<double> x, y, z1, z2, Lambda, u;
    std::vector<double> p, q1, q2, q3, k;
    double R2adj = 0.0;

    /// All entries zero, sized for `spec`.
    static HamiltonianPoint zeros(const ProblemSpec& spec);
};

enum class Wrt { x, y, z1, z2, Lambda, u };

const char* to_string(Wrt wrt);
std::size_t block_size(const ProblemSpec& spec, Wrt wrt);

/// Reusable evaluator with scratch buffers. Not thread-safe; use one per
/// worker.
class Hamiltonian {
public:
    explicit Hamiltonian(const ProblemSpec& spec);

    double value(const HamiltonianPoint& pt);

    /// Partial derivative with the R2adj slot held fixed. The Lambda block
    /// holds ordinary partials per mark, [M x m] mark-major.
    void gradient(const HamiltonianPoint& pt, Wrt wrt, std::span<double> out);

    /// Every block at once; coefficient Jacobians are evaluated once.
    struct Gradients {
        std::vector<double> x, y, z1, z2, Lambda, u;
    };
    void gradients(const HamiltonianPoint& pt, Gradients& out);

private:
    void block(const HamiltonianPoint& pt, Wrt wrt, std::span<double> out);

    void load(const HamiltonianPoint& pt);
    void state_jacobians(double t);

    const ProblemSpec& spec_;
    BackwardLayout lay_;
    std::vector<double> sarg_, barg_;
    std::vector<double> b_, s1_, s2_, g_, f_;
    std::vector<double> jb_, js1_, js2_, jg_, jh_, jf_, jl_;
};

double eval_H(const ProblemSpec& spec, const HamiltonianPoint& pt);
std::vector<double> grad_H(const ProblemSpec& spec, const HamiltonianPoint& pt, Wrt wrt);

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    std::size_t worst_point = 0;
    std::string worst_block;
    std::size_t worst_index = 0;
    bool passed = false;
};

/// Central differences of eval_H against grad_H in every coordinate of
/// every block. Relative error is |fd - an| / max(1, |fd|, |an|); passes
/// when the maximum is strictly below `tol`.
FiniteDiffReport finite_diff_check(const ProblemSpec& spec, std::span<const HamiltonianPoint> pts, double tol);

/// Points with every entry uniform in [-radius, radius] (controls clipped to
/// the control set) and t uniform on [0, T].
std::vector<HamiltonianPoint> random_points(const ProblemSpec& spec, std::size_t count, std::uint64_t seed,
                                            double radius = 2.0);

}  // namespace fbsde
