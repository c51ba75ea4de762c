#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace reponav {

/// Runs fn(i) for i in [0, n) on a small worker pool. Callers write results
/// into pre-sized slots so the merge order stays deterministic.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    unsigned threads = std::clamp(std::thread::hardware_concurrency(), 1u, 8u);
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
}

}  // namespace reponav
