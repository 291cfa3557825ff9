#pragma once

#include "smnarx/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace smnarx {

/// Thread count from SMNARX_THREADS, else the hardware concurrency.
inline int default_threads()
{
    if (const char* env = std::getenv("SMNARX_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1)
                return n;
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count). Work items must be independent.
template <typename F>
void parallel_for(Index count, int threads, F&& fn)
{
    if (threads <= 1 || count <= 1) {
        for (Index i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (Index i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    const Index n = std::min<Index>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (Index t = 0; t < n; ++t)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace smnarx
