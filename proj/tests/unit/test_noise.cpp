#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "fbsde/noise.hpp"
#include "fbsde/parallel.hpp"
#include "fbsde/philox.hpp"

using namespace fbsde;

TEST_CASE("Philox4x32-10 known-answer vectors", "[noise]") {
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("time grid", "[noise]") {
    const TimeGrid g = make_grid(1.0, 4);
    CHECK(g.dt == 0.25);
    CHECK(g.nodes() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    const TimeGrid one = make_grid(2.0, 1);
    CHECK(one.dt == 2.0);
    CHECK(one.nodes() == std::vector<double>{0.0, 2.0});
    CHECK_THROWS_AS(make_grid(1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(0.0, 4), std::invalid_argument);
}

TEST_CASE("no marks: empty jump counts, centred Brownian increments", "[noise]") {
    const TimeGrid g = make_grid(1.0, 10);
    const std::size_t P = 100000;
    const NoiseBundle nb = sample_noise(g, MarkSpace{}, P, 42);
    CHECK(nb.jump_counts.empty());
    const MeanStderr m = mean_stderr(P, [&](std::size_t p) { return nb.dW(p, 0); });
    CHECK(std::abs(m.mean) <= 3.0 * std::sqrt(g.dt / P));
}

TEST_CASE("Poisson counts have mean nu dt", "[noise]") {
    const TimeGrid g = make_grid(1.0, 100);
    const std::size_t P = 100000;
    const NoiseBundle nb = sample_noise(g, MarkSpace{{2.0}}, P, 42);
    const MeanStderr m = mean_stderr(P, [&](std::size_t p) { return static_cast<double>(nb.count(p, 0, 0)); });
    CHECK(std::abs(m.mean - 0.02) <= 3.0 * std::sqrt(0.02 / P));
}

TEST_CASE("Brownian variance within 1% of dt at 1e6 samples", "[noise]") {
    const TimeGrid g = make_grid(1.0, 100);
    const NoiseBundle nb = sample_noise(g, MarkSpace{{1.0}}, 10000, 5);
    for (const Tensor3* t : {&nb.dW, &nb.dY}) {
        double s = 0.0, s2 = 0.0;
        for (double v : t->raw()) {
            s += v;
            s2 += v * v;
        }
        const double n = static_cast<double>(t->raw().size());
        const double var = s2 / n - (s / n) * (s / n);
        CHECK(std::abs(var - g.dt) <= 0.01 * g.dt);
    }
}

TEST_CASE("sampling is a pure function of the seed", "[noise]") {
    const TimeGrid g = make_grid(1.0, 30);
    const MarkSpace marks{{1.0, 0.5}};
    set_thread_count(1);
    const NoiseBundle a = sample_noise(g, marks, 5000, 11);
    set_thread_count(3);
    const NoiseBundle b = sample_noise(g, marks, 5000, 11);
    set_thread_count(0);
    CHECK(a == b);
    CHECK_FALSE(a == sample_noise(g, marks, 5000, 12));

    const PathNoise row = sample_path_noise(g, marks, 11, 4321);
    for (std::size_t n = 0; n < g.N; ++n) {
        CHECK(row.dW[n] == a.dW(4321, n));
        CHECK(row.dY[n] == a.dY(4321, n));
        for (std::size_t e = 0; e < 2; ++e) CHECK(row.jumps[n * 2 + e] == a.count(4321, n, e));
    }
}

TEST_CASE("noise bundles round-trip through files", "[noise]") {
    const TimeGrid g = make_grid(1.0, 8);
    const NoiseBundle a = sample_noise(g, MarkSpace{{1.5}}, 100, 3);
    const auto file = std::filesystem::temp_directory_path() / "fbsde_noise_roundtrip.bin";
    save_noise(a, file);
    CHECK(load_noise(file) == a);
    std::filesystem::remove(file);
}
