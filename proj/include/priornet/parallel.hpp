#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace priornet {

// Runs fn(i) for i in [0, n) across up to max_threads workers. Work is
// strided, so worker t handles i = t, t + T, t + 2T, ... Callers that need
// determinism write into per-index slots and reduce in index order afterwards.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned max_threads = 0) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    unsigned T = max_threads == 0 ? hw : std::min(max_threads, hw);
    if (n < 2 || T < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (static_cast<std::size_t>(T) > n) T = static_cast<unsigned>(n);
    std::vector<std::thread> workers;
    workers.reserve(T);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (unsigned t = 0; t < T; ++t) {
        workers.emplace_back([&, t]() {
            try {
                for (std::size_t i = t; i < n; i += T) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace priornet
