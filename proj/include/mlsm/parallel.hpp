#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace mlsm {

/// Thread count from MLSM_THREADS, falling back to 1.
inline int default_threads() {
    if (const char* env = std::getenv("MLSM_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// Runs body(i) for i in [0, count). Each index writes only its own slot, so the
// result does not depend on the thread count.
template <typename Body>
void parallel_for(Eigen::Index count, int threads, Body&& body) {
    const Eigen::Index workers = std::clamp<Eigen::Index>(threads, 1, std::max<Eigen::Index>(count, 1));
    if (workers <= 1) {
        for (Eigen::Index i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const Eigen::Index chunk = (count + workers - 1) / workers;
    for (Eigen::Index w = 0; w < workers; ++w) {
        const Eigen::Index lo = w * chunk;
        const Eigen::Index hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (Eigen::Index i = lo; i < hi; ++i) body(i);
        });
    }
}

}  // namespace mlsm
