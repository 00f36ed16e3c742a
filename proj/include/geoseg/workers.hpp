#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace geoseg {

/// Worker cap: GEOSEG_WORKERS when set, otherwise the logical core count.
inline int worker_count() {
    if (const char *env = std::getenv("GEOSEG_WORKERS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) {
            return static_cast<int>(n);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run f(i) for i in [0, n) across `workers` threads, pulling indices from a
/// shared counter. The first exception wins and is rethrown after join.
template <typename F>
void parallel_for(std::int64_t n, int workers, F &&f) {
    if (n <= 0) {
        return;
    }
    if (workers > n) {
        workers = static_cast<int>(n);
    }
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) {
            f(i);
        }
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto body = [&] {
        for (;;) {
            const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n || failed.load(std::memory_order_relaxed)) {
                return;
            }
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) {
                    error = std::current_exception();
                }
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back(body);
    }
    for (auto &th : pool) {
        th.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace geoseg
