#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbsde {

/// Raised when a problem definition is malformed (bad dimensions,
/// non-finite coefficient output, violated structural precondition).
class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Finite jump-mark space E = {e_1..e_M} with intensities nu_i (1/time).
struct MarkSpace {
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double total_mass() const;
    void validate() const;
};

/// Box control set U = [lower, upper] (components may be infinite).
struct ControlSet {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const { return lower.size(); }
    bool bounded() const;
    void project(std::span<double> u) const;
    bool contains(std::span<const double> u) const;
    void validate() const;

    static ControlSet unbounded(std::size_t dim);
    bool operator==(const ControlSet&) const = default;
};

/// One coefficient map with its Jacobian.
///
/// `value` writes out_dim entries; `jacobian` writes an out_dim x in_dim
/// row-major matrix of partial derivatives with respect to `arg`.
struct Coefficient {
    using Fn = std::function<void(double t, std::span<const double> arg, std::span<double> out)>;

    std::string name;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Fn value;
    Fn jacobian;

    void eval(double t, std::span<const double> arg, std::span<double> out) const;
    void jac(double t, std::span<const double> arg, std::span<double> out) const;
    double scalar(double t, std::span<const double> arg) const;
};

/// Offsets into the argument vector [x, y, z1, z2, Lambda, u] shared by f and l.
/// Lambda is mark-major: block i holds the m components for mark e_i.
struct BackwardLayout {
    std::size_t n = 0, m = 0, marks = 0, k = 0;

    std::size_t x() const { return 0; }
    std::size_t y() const { return n; }
    std::size_t z1() const { return n + m; }
    std::size_t z2() const { return n + 2 * m; }
    std::size_t lambda() const { return n + 3 * m; }
    std::size_t u() const { return n + 3 * m + m * marks; }
    std::size_t size() const { return n + 3 * m + m * marks + k; }
};

/// Coefficient maps of the controlled system, observation and cost.
///
///   b, sigma1, sigma2 : (t, [x,u]) -> R^n
///   g                 : (t, [x,u]) -> R^{n*M}, mark-major
///   h                 : (t, [x,u]) -> R
///   f                 : (t, [x,y,z1,z2,Lambda,u]) -> R^m
///   l                 : (t, [x,y,z1,z2,Lambda,u]) -> R
///   phi               : x -> R^m      Phi : x -> R      gamma : y -> R
struct CoefficientBundle {
    Coefficient b, sigma1, sigma2, g, h;
    Coefficient f, l;
    Coefficient phi, Phi, gamma;

    std::vector<const Coefficient*> all() const;
};

struct ProblemSpec {
    std::string name;
    std::size_t n = 1, m = 1, k = 1;
    double T = 1.0;
    std::vector<double> x0;
    MarkSpace marks;
    ControlSet control;
    CoefficientBundle coefficients;

    std::size_t num_marks() const { return marks.size(); }
    BackwardLayout backward_layout() const { return {n, m, marks.size(), k}; }
    std::size_t state_arg_dim() const { return n + k; }

    /// Structural checks only: positive horizon, declared dimensions of
    /// every evaluator. Throws SpecError naming the offending evaluator.
    void check_dimensions() const;
};

struct ValidationCheck {
    std::string name;
    bool passed = true;
    double worst_value = 0.0;
    std::vector<double> worst_point;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool passed() const;
    std::vector<const ValidationCheck*> failures() const;
};

struct ValidationOptions {
    double radius = 10.0;           // sampling hypercube half-width
    double derivative_rtol = 1e-5;  // derivative vs central difference
    double growth_factor = 1.5;     // sup at 10x radius may not exceed this multiple
};

/// Sample-based check of the standing assumptions: dimensions, derivative
/// evaluators against central differences, boundedness of h and sigma2,
/// and bounded first derivatives of b, sigma1, sigma2, h, g, f and phi.
ValidationReport validate_spec(const ProblemSpec& spec, std::size_t samples, std::uint64_t seed,
                               const ValidationOptions& options = {});

/// Scalar linear-quadratic benchmark with one jump mark.
struct LqParams {
    double a = -1.0;            // drift b = a x + u
    double c1 = 0.3;            // sigma1
    double c2 = 0.3;            // sigma2
    double jump_size = 0.2;     // g
    double intensity = 1.0;     // nu_1
    double qx = 1.0;
    double qu = 1.0;
    double wT = 1.0;
    double h0 = 0.5;            // observation drift h = h0 + h_gain tanh(x)
    double h_gain = 0.0;
    double phi0 = 1.0;          // phi(x) = phi0 x
    double x0 = 1.0;
    double T = 1.0;
    double u_lower = -std::numeric_limits<double>::infinity();
    double u_upper = std::numeric_limits<double>::infinity();
};

ProblemSpec builtin_lq_problem(const LqParams& params);

}  // namespace fbsde
