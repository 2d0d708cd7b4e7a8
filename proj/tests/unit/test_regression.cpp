#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fbsde/parallel.hpp"
#include "fbsde/regression.hpp"

using namespace fbsde;

namespace {
std::vector<double> normal_sample(std::size_t rows, std::size_t vars, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> out(rows * vars);
    for (double& v : out) v = z(rng);
    return out;
}
}  // namespace

TEST_CASE("constant targets are fitted exactly", "[regression]") {
    const auto x = normal_sample(1000, 2, 1);
    const std::vector<double> y(1000, 3.25);
    const Regression r(x, 1000, 2, y, 1, {2, 0.0});
    for (double v : r.fitted()) CHECK(v == Catch::Approx(3.25).margin(1e-12));
}

TEST_CASE("targets equal to the features are reproduced", "[regression]") {
    const auto x = normal_sample(500, 2, 2);
    const Regression r(x, 500, 2, x, 2, {1, 0.0});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(r.fitted()[i] == Catch::Approx(x[i]).margin(1e-10));
}

TEST_CASE("degree-1 fit of x^2 on a symmetric sample", "[regression]") {
    std::vector<double> x;
    for (int i = -500; i <= 500; ++i) x.push_back(i / 250.0);
    const std::size_t n = x.size();
    std::vector<double> y(n);
    double mean_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_sq += (y[i] = x[i] * x[i]) / static_cast<double>(n);
    const Regression r(x, n, 1, y, 1, {1, 0.0});
    double dot1 = 0.0, dotx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(r.fitted()[i] == Catch::Approx(mean_sq).margin(1e-10));
        const double res = y[i] - r.fitted()[i];
        dot1 += res;
        dotx += res * x[i];
    }
    CHECK(std::abs(dot1) <= 1e-10);
    CHECK(std::abs(dotx) <= 1e-10);
}

TEST_CASE("zero-variance and duplicate variables are dropped", "[regression]") {
    const std::size_t n = 400;
    auto x = normal_sample(n, 3, 3);
    for (std::size_t i = 0; i < n; ++i) {
        x[i * 3 + 1] = 2.0;                 // constant
        x[i * 3 + 2] = 0.5 * x[i * 3];      // collinear with the first
    }
    const PolynomialBasis basis(x, n, 3, 2);
    CHECK(basis.active() == std::vector<std::size_t>{0});
    CHECK(basis.size() == 3);
}

TEST_CASE("equal weights reproduce the unweighted fit", "[regression]") {
    const std::size_t n = 800;
    const auto x = normal_sample(n, 1, 4);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::sin(x[i]);
    const std::vector<double> w(n, 2.5);
    const Regression plain(x, n, 1, y, 1, {2, 0.0});
    const Regression weighted(x, n, 1, y, 1, {2, 0.0}, w);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(weighted.fitted()[i] == Catch::Approx(plain.fitted()[i]).margin(1e-12));
    CHECK_THROWS(Regression(x, n, 1, y, 1, {2, 0.0}, std::vector<double>(n, 0.0)));
    CHECK_THROWS(Regression(x, n, 1, y, 1, {2, 0.0}, std::vector<double>(n - 1, 1.0)));
}

TEST_CASE("regression is bit-identical across thread counts", "[regression]") {
    const std::size_t n = 9000;
    const auto x = normal_sample(n, 2, 5);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[2 * i] * x[2 * i + 1] + x[2 * i];
    set_thread_count(1);
    const Regression a(x, n, 2, y, 1, {2, 0.0});
    set_thread_count(3);
    const Regression b(x, n, 2, y, 1, {2, 0.0});
    set_thread_count(0);
    CHECK(a.coefficients() == b.coefficients());
    CHECK(a.fitted() == b.fitted());
}
