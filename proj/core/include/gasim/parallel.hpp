#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace gasim {

inline unsigned worker_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n) across hardware threads, blocking until done.
/// Iterations must be independent; each index is executed exactly once, so
/// results are deterministic whenever fn writes only to index-owned slots.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    if (n <= 0) return;
    const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(n));
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            // Contiguous block per worker: cache-friendly and deterministic.
            const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
            const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
            for (int i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace gasim
