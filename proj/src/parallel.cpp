#include "fbsde/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace fbsde {

namespace {
std::atomic<std::size_t> g_threads{0};
}

void set_thread_count(std::size_t threads) { g_threads.store(threads); }

std::size_t thread_count() {
    std::size_t t = g_threads.load();
    if (t == 0) t = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return t;
}

void for_each_chunk(std::size_t count,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t chunks = chunk_count(count);
    const std::size_t workers = std::min(thread_count(), chunks);
    auto run_chunk = [&](std::size_t c) {
        const std::size_t begin = c * kChunkSize;
        fn(begin, std::min(count, begin + kChunkSize), c);
    };
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
            try {
                run_chunk(c);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

double ordered_sum(std::size_t count, const std::function<double(std::size_t)>& term) {
    std::vector<double> partial(chunk_count(count), 0.0);
    for_each_chunk(count, [&](std::size_t b, std::size_t e, std::size_t c) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += term(i);
        partial[c] = s;
    });
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

MeanStderr mean_stderr(std::size_t count, const std::function<double(std::size_t)>& sample) {
    if (count == 0) return {};
    std::vector<double> values(count);
    for_each_chunk(count, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t i = b; i < e; ++i) values[i] = sample(i);
    });
    const double n = static_cast<double>(count);
    const double mean = ordered_sum(count, [&](std::size_t i) { return values[i]; }) / n;
    if (count < 2) return {mean, 0.0};
    const double ss = ordered_sum(count, [&](std::size_t i) {
        const double d = values[i] - mean;
        return d * d;
    });
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace fbsde
