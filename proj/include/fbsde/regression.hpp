#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fbsde {

class RegressionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Polynomial regression basis: total degree and ridge weight.
struct BasisSpec {
    std::size_t degree = 2;
    double ridge = 0.0;
};

/// Monomials of total degree <= d in standardized variables. Variables with
/// zero sample variance are dropped (they are absorbed by the intercept).
class PolynomialBasis {
public:
    PolynomialBasis() = default;
    /// `sample` is row-major [rows x vars]; standardization is fitted on it.
    PolynomialBasis(std::span<const double> sample, std::size_t rows, std::size_t vars, std::size_t degree);

    std::size_t size() const { return terms_; }
    std::size_t vars() const { return vars_; }
    std::size_t degree() const { return degree_; }
    const std::vector<std::size_t>& active() const { return active_; }

    void eval(std::span<const double> point, std::span<double> out) const;

private:
    std::size_t vars_ = 0;
    std::size_t degree_ = 0;
    std::size_t terms_ = 1;
    std::vector<std::size_t> active_;
    std::vector<double> mean_, scale_;  // per active variable
    std::vector<unsigned char> exponents_;  // [terms x active]

    friend class Regression;
};

/// Ridge-regularized least squares of targets on a polynomial basis.
/// Reductions over rows run in fixed chunk order, so results do not depend
/// on the thread count.
class Regression {
public:
    /// features: row-major [rows x vars]; targets: row-major [rows x dims].
    /// Optional nonnegative row weights give weighted least squares.
    Regression(std::span<const double> features, std::size_t rows, std::size_t vars,
               std::span<const double> targets, std::size_t dims, const BasisSpec& spec,
               std::span<const double> weights = {});

    std::size_t dims() const { return dims_; }
    std::size_t basis_size() const { return basis_.terms_; }
    const PolynomialBasis& basis() const { return basis_; }
    /// [basis_size x dims] row-major, for the standardized basis.
    const std::vector<double>& coefficients() const { return coef_; }
    /// Fitted values [rows x dims] row-major.
    const std::vector<double>& fitted() const { return fitted_; }

    void predict(std::span<const double> point, std::span<double> out) const;

    /// Degree-1 fits only: coefficients on the raw variables, intercept first,
    /// [(1 + vars) x dims] row-major. Dropped variables get 0.
    std::vector<double> raw_linear() const;

private:
    PolynomialBasis basis_;
    std::size_t dims_ = 0;
    std::vector<double> coef_;
    std::vector<double> fitted_;
};

}  // namespace fbsde
