#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace fbsde {

/// Path ranges are cut into chunks of this fixed size no matter how many
/// threads run, so chunk-wise partial sums combine in the same order and
/// reductions are bit-identical across thread counts.
inline constexpr std::size_t kChunkSize = 2048;

/// Worker threads used by path-parallel loops. 0 selects the hardware count.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Calls fn(begin, end, chunk_index) for every chunk of [0, count).
/// Chunks run concurrently; fn must only write to chunk-private state.
void for_each_chunk(std::size_t count,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t chunk_count(std::size_t count) {
    return (count + kChunkSize - 1) / kChunkSize;
}

/// Deterministic sum of per-path values: chunk partials combined in chunk order.
double ordered_sum(std::size_t count, const std::function<double(std::size_t)>& term);

/// Mean and standard error of per-path samples, reduced in fixed order.
struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
};
MeanStderr mean_stderr(std::size_t count, const std::function<double(std::size_t)>& sample);

}  // namespace fbsde
