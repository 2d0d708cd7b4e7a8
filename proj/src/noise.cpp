#include "fbsde/noise.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "fbsde/parallel.hpp"
#include "fbsde/philox.hpp"

namespace fbsde {

std::vector<double> TimeGrid::nodes() const {
    std::vector<double> out(N + 1);
    for (std::size_t n = 0; n <= N; ++n) out[n] = t(n);
    return out;
}

TimeGrid make_grid(double T, std::size_t N) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("time grid needs T > 0");
    if (N < 1) throw std::invalid_argument("time grid needs N >= 1");
    return {N, T, T / static_cast<double>(N)};
}

namespace {

void fill_path(const TimeGrid& grid, const MarkSpace& marks, std::uint64_t seed, std::size_t path,
               double* dW, double* dY, std::int32_t* jumps, std::size_t stride, std::size_t jump_stride) {
    const double sdt = std::sqrt(grid.dt);
    const auto p32 = static_cast<std::uint32_t>(path);
    for (std::size_t n = 0; n < grid.N; ++n) {
        const auto s32 = static_cast<std::uint32_t>(n);
        dW[n * stride] = sdt * KeyedStream(seed, p32, s32, kStreamW).next_normal();
        dY[n * stride] = sdt * KeyedStream(seed, p32, s32, kStreamY).next_normal();
        for (std::size_t i = 0; i < marks.size(); ++i) {
            KeyedStream js(seed, p32, s32, kJumpStreamBase + static_cast<std::uint32_t>(i));
            jumps[n * jump_stride + i] = js.next_poisson(marks.weights[i] * grid.dt);
        }
    }
}

}  // namespace

NoiseBundle sample_noise(const TimeGrid& grid, const MarkSpace& marks, std::size_t paths, std::uint64_t seed) {
    if (paths < 1) throw std::invalid_argument("sample_noise needs paths >= 1");
    marks.validate();
    NoiseBundle nb;
    nb.seed = seed;
    nb.paths = paths;
    nb.N = grid.N;
    nb.marks = marks.size();
    nb.dt = grid.dt;
    nb.mark_weights = marks.weights;
    nb.dW = Tensor3(paths, grid.N, 1);
    nb.dY = Tensor3(paths, grid.N, 1);
    nb.jump_counts.assign(grid.N * paths * nb.marks, 0);
    for_each_chunk(paths, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t p = b; p < e; ++p) {
            fill_path(grid, marks, seed, p, &nb.dW(p, 0), &nb.dY(p, 0),
                      nb.jump_counts.data() + p * nb.marks, paths, paths * nb.marks);
        }
    });
    return nb;
}

PathNoise sample_path_noise(const TimeGrid& grid, const MarkSpace& marks, std::uint64_t seed, std::size_t path) {
    PathNoise pn;
    pn.dW.resize(grid.N);
    pn.dY.resize(grid.N);
    pn.jumps.resize(grid.N * marks.size());
    fill_path(grid, marks, seed, path, pn.dW.data(), pn.dY.data(), pn.jumps.data(), 1, marks.size());
    return pn;
}

namespace {

constexpr char kMagic[8] = {'F', 'B', 'S', 'D', 'N', 'O', 'I', 'Z'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("truncated noise file");
    return v;
}

}  // namespace

void save_noise(const NoiseBundle& nb, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
    os.write(kMagic, sizeof kMagic);
    put(os, kVersion);
    put(os, nb.seed);
    put(os, static_cast<std::uint64_t>(nb.N));
    put(os, static_cast<std::uint64_t>(nb.paths));
    put(os, static_cast<std::uint64_t>(nb.marks));
    put(os, nb.dt);
    for (double w : nb.mark_weights) put(os, w);
    os.write(reinterpret_cast<const char*>(nb.dW.raw().data()),
             static_cast<std::streamsize>(nb.dW.raw().size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(nb.dY.raw().data()),
             static_cast<std::streamsize>(nb.dY.raw().size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(nb.jump_counts.data()),
             static_cast<std::streamsize>(nb.jump_counts.size() * sizeof(std::int32_t)));
    if (!os) throw std::runtime_error("failed writing " + file.string());
}

NoiseBundle load_noise(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + file.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error(file.string() + " is not a noise bundle");
    const auto version = get<std::uint32_t>(is);
    if (version != kVersion) throw std::runtime_error("unsupported noise bundle version " + std::to_string(version));
    NoiseBundle nb;
    nb.seed = get<std::uint64_t>(is);
    nb.N = get<std::uint64_t>(is);
    nb.paths = get<std::uint64_t>(is);
    nb.marks = get<std::uint64_t>(is);
    nb.dt = get<double>(is);
    nb.mark_weights.resize(nb.marks);
    for (auto& w : nb.mark_weights) w = get<double>(is);
    nb.dW = Tensor3(nb.paths, nb.N, 1);
    nb.dY = Tensor3(nb.paths, nb.N, 1);
    nb.jump_counts.resize(nb.N * nb.paths * nb.marks);
    is.read(reinterpret_cast<char*>(nb.dW.raw().data()),
            static_cast<std::streamsize>(nb.dW.raw().size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(nb.dY.raw().data()),
            static_cast<std::streamsize>(nb.dY.raw().size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(nb.jump_counts.data()),
            static_cast<std::streamsize>(nb.jump_counts.size() * sizeof(std::int32_t)));
    if (!is) throw std::runtime_error("truncated noise file " + file.string());
    return nb;
}

}  // namespace fbsde
