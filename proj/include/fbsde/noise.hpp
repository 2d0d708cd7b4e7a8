#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "fbsde/problem.hpp"
#include "fbsde/tensor.hpp"

namespace fbsde {

struct TimeGrid {
    std::size_t N = 1;
    double T = 1.0;
    double dt = 1.0;

    double t(std::size_t n) const { return n == N ? T : static_cast<double>(n) * dt; }
    std::vector<double> nodes() const;
};

/// Uniform grid of N steps on [0, T]. Throws std::invalid_argument when
/// T <= 0 or N == 0.
TimeGrid make_grid(double T, std::size_t N);

/// Stream identifiers in the counter; jump marks use kJumpStreamBase + i.
inline constexpr std::uint32_t kStreamW = 0;
inline constexpr std::uint32_t kStreamY = 1;
inline constexpr std::uint32_t kJumpStreamBase = 2;

/// Discretized drivers under the reference measure: Brownian increments of
/// W and Y, and per-step Poisson counts for each mark.
struct NoiseBundle {
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::size_t N = 0;
    std::size_t marks = 0;
    double dt = 0.0;
    std::vector<double> mark_weights;
    Tensor3 dW;                               // [paths x N x 1]
    Tensor3 dY;                               // [paths x N x 1]
    std::vector<std::int32_t> jump_counts;    // step-major [N][paths][M]

    std::int32_t count(std::size_t path, std::size_t step, std::size_t mark) const {
        return jump_counts[(step * paths + path) * marks + mark];
    }
    /// Compensated count dN - nu_i dt.
    double compensated(std::size_t path, std::size_t step, std::size_t mark) const {
        return static_cast<double>(count(path, step, mark)) - mark_weights[mark] * dt;
    }

    bool operator==(const NoiseBundle&) const = default;
};

NoiseBundle sample_noise(const TimeGrid& grid, const MarkSpace& marks, std::size_t paths, std::uint64_t seed);

/// Single-path regeneration; identical to row `path` of sample_noise.
struct PathNoise {
    std::vector<double> dW, dY;
    std::vector<std::int32_t> jumps;  // [N][M]
};
PathNoise sample_path_noise(const TimeGrid& grid, const MarkSpace& marks, std::uint64_t seed, std::size_t path);

/// Binary regression baselines. Header: magic, version, seed, N, paths, M, dt.
void save_noise(const NoiseBundle& noise, const std::filesystem::path& file);
NoiseBundle load_noise(const std::filesystem::path& file);

}  // namespace fbsde
