#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace foldkit {

// Static-chunk parallel loop. Each index writes only its own slots, so the
// result never depends on the thread count; exceptions are rethrown on the
// calling thread.
inline void parallel_for(int64_t n, int threads,
                         const std::function<void(int64_t)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    if (threads == 1 || n <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    const int64_t t_count = std::min<int64_t>(threads, n);
    for (int64_t t = 0; t < t_count; ++t) {
        pool.emplace_back([&, t]() {
            const int64_t lo = t * n / t_count;
            const int64_t hi = (t + 1) * n / t_count;
            try {
                for (int64_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace foldkit
