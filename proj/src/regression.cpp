#include "fbsde/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbsde/parallel.hpp"

namespace fbsde {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Exponent vectors with total degree <= d, ordered by degree, intercept first.
void enumerate(std::size_t vars, std::size_t degree, std::vector<unsigned char>& out) {
    std::vector<unsigned char> e(vars, 0);
    for (std::size_t total = 0; total <= degree; ++total) {
        // Compositions of `total` into `vars` parts, lexicographic.
        auto rec = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
            if (pos + 1 == vars) {
                e[pos] = static_cast<unsigned char>(left);
                out.insert(out.end(), e.begin(), e.end());
                return;
            }
            for (std::size_t take = left + 1; take-- > 0;) {
                e[pos] = static_cast<unsigned char>(take);
                self(self, pos + 1, left - take);
            }
        };
        if (vars == 0) {
            if (total == 0) return;  // intercept only, stored as an empty row
            continue;
        }
        rec(rec, 0, total);
    }
}

}  // namespace

PolynomialBasis::PolynomialBasis(std::span<const double> sample, std::size_t rows, std::size_t vars,
                                 std::size_t degree)
    : vars_(vars), degree_(degree) {
    if (degree > 8) throw RegressionError("basis degree above 8 is not supported");
    const double n = static_cast<double>(rows);
    for (std::size_t v = 0; v < vars; ++v) {
        const double mean = ordered_sum(rows, [&](std::size_t r) { return sample[r * vars + v]; }) / n;
        const double var = ordered_sum(rows, [&](std::size_t r) {
                               const double d = sample[r * vars + v] - mean;
                               return d * d;
                           }) / n;
        const double sd = std::sqrt(var);
        if (degree == 0 || !(sd > 1e-12 * std::max(1.0, std::abs(mean)))) continue;
        // An exact affine copy of an active variable adds nothing but a
        // singular direction (e.g. the running average at its first step).
        bool duplicate = false;
        for (std::size_t j = 0; j < active_.size() && !duplicate; ++j) {
            const std::size_t w = active_[j];
            const double cov = ordered_sum(rows, [&](std::size_t r) {
                                   return (sample[r * vars + v] - mean) * (sample[r * vars + w] - mean_[j]);
                               }) / n;
            duplicate = std::abs(cov / sd * scale_[j]) > 1.0 - 1e-9;
        }
        if (duplicate) continue;
        active_.push_back(v);
        mean_.push_back(mean);
        scale_.push_back(1.0 / sd);
    }
    enumerate(active_.size(), degree, exponents_);
    terms_ = active_.empty() ? 1 : exponents_.size() / active_.size();
}

void PolynomialBasis::eval(std::span<const double> point, std::span<double> out) const {
    const std::size_t a = active_.size();
    if (a == 0) {
        out[0] = 1.0;
        return;
    }
    double z[64][9];
    for (std::size_t j = 0; j < a; ++j) {
        const double s = (point[active_[j]] - mean_[j]) * scale_[j];
        z[j][0] = 1.0;
        for (std::size_t d = 1; d <= degree_; ++d) z[j][d] = z[j][d - 1] * s;
    }
    for (std::size_t t = 0; t < terms_; ++t) {
        double v = 1.0;
        const unsigned char* e = exponents_.data() + t * a;
        for (std::size_t j = 0; j < a; ++j) v *= z[j][e[j]];
        out[t] = v;
    }
}

Regression::Regression(std::span<const double> features, std::size_t rows, std::size_t vars,
                       std::span<const double> targets, std::size_t dims, const BasisSpec& spec,
                       std::span<const double> weights)
    : dims_(dims) {
    if (spec.ridge < 0.0) throw RegressionError("ridge must be >= 0");
    if (vars > 64) throw RegressionError("at most 64 regression variables are supported");
    if (features.size() != rows * vars || targets.size() != rows * dims)
        throw RegressionError("regression inputs have inconsistent sizes");
    if (!weights.empty() && weights.size() != rows) throw RegressionError("one weight per row is required");
    basis_ = PolynomialBasis(features, rows, vars, spec.degree);
    const std::size_t B = basis_.terms_;
    if (rows <= B) {
        std::ostringstream os;
        os << "regression needs more rows (" << rows << ") than basis functions (" << B << ")";
        throw RegressionError(os.str());
    }

    // Normal equations, accumulated chunk by chunk in a fixed order.
    const std::size_t chunks = chunk_count(rows);
    std::vector<Eigen::MatrixXd> gram(chunks), cross(chunks);
    for_each_chunk(rows, [&](std::size_t b, std::size_t e, std::size_t c) {
        RowMatrix phi(static_cast<Eigen::Index>(e - b), static_cast<Eigen::Index>(B));
        for (std::size_t r = b; r < e; ++r)
            basis_.eval(features.subspan(r * vars, vars), {phi.row(static_cast<Eigen::Index>(r - b)).data(), B});
        Eigen::Map<const RowMatrix> y(targets.data() + b * dims, static_cast<Eigen::Index>(e - b),
                                      static_cast<Eigen::Index>(dims));
        if (weights.empty()) {
            gram[c] = phi.transpose() * phi;
            cross[c] = phi.transpose() * y;
        } else {
            Eigen::Map<const Eigen::VectorXd> w(weights.data() + b, static_cast<Eigen::Index>(e - b));
            const RowMatrix wphi = w.asDiagonal() * phi;
            gram[c] = wphi.transpose() * phi;
            cross[c] = wphi.transpose() * y;
        }
    });
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(B));
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(dims));
    for (std::size_t c = 0; c < chunks; ++c) {
        G += gram[c];
        C += cross[c];
    }
    double mass = static_cast<double>(rows);
    if (!weights.empty()) mass = ordered_sum(rows, [&](std::size_t r) { return weights[r]; });
    if (!(mass > 0.0)) throw RegressionError("regression weights sum to zero");
    G /= mass;
    C /= mass;
    for (std::size_t i = 1; i < B; ++i) G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += spec.ridge;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 1e-12 * hi)) {
        std::ostringstream os;
        os << "rank-deficient normal equations (eigenvalue ratio " << lo / hi << ")";
        if (spec.ridge == 0.0) os << "; set ridge > 0";
        throw RegressionError(os.str());
    }
    const Eigen::MatrixXd beta = G.ldlt().solve(C);
    coef_.resize(B * dims);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t d = 0; d < dims; ++d)
            coef_[i * dims + d] = beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));

    fitted_.resize(rows * dims);
    for_each_chunk(rows, [&](std::size_t b, std::size_t e, std::size_t) {
        std::vector<double> phi(B);
        for (std::size_t r = b; r < e; ++r) {
            basis_.eval(features.subspan(r * vars, vars), phi);
            for (std::size_t d = 0; d < dims; ++d) {
                double s = 0.0;
                for (std::size_t i = 0; i < B; ++i) s += phi[i] * coef_[i * dims + d];
                fitted_[r * dims + d] = s;
            }
        }
    });
}

void Regression::predict(std::span<const double> point, std::span<double> out) const {
    const std::size_t B = basis_.terms_;
    std::vector<double> phi(B);
    basis_.eval(point, phi);
    for (std::size_t d = 0; d < dims_; ++d) {
        double s = 0.0;
        for (std::size_t i = 0; i < B; ++i) s += phi[i] * coef_[i * dims_ + d];
        out[d] = s;
    }
}

std::vector<double> Regression::raw_linear() const {
    if (basis_.degree_ > 1) throw RegressionError("raw_linear needs a basis of degree <= 1");
    const std::size_t V = basis_.vars_;
    std::vector<double> out((1 + V) * dims_, 0.0);
    for (std::size_t d = 0; d < dims_; ++d) {
        double intercept = coef_[d];
        for (std::size_t j = 0; j < basis_.active_.size(); ++j) {
            // Term j + 1 is the standardized variable j.
            const double c = coef_[(j + 1) * dims_ + d] * basis_.scale_[j];
            out[(1 + basis_.active_[j]) * dims_ + d] = c;
            intercept -= c * basis_.mean_[j];
        }
        out[d] = intercept;
    }
    return out;
}

}  // namespace fbsde
