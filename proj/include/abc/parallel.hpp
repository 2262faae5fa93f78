#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace abc {

// ABC_THREADS caps the worker count; default is the hardware concurrency.
inline unsigned thread_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ABC_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
    }
    return hw;
}

// Static contiguous chunks; f(i) must only write slot i of its outputs.
template <class F>
void parallel_for(size_t n, F&& f) {
    const unsigned t = static_cast<unsigned>(std::min<size_t>(thread_count(), std::max<size_t>(n / 64, 1)));
    if (t <= 1) {
        for (size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    for (unsigned w = 0; w < t; ++w) {
        const size_t lo = n * w / t, hi = n * (w + 1) / t;
        pool.emplace_back([&, lo, hi] {
            try {
                for (size_t i = lo; i < hi; ++i) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// Pairwise tree sum: the result does not depend on the thread count.
inline double tree_sum(const double* v, size_t n) {
    if (n == 0) return 0.0;
    if (n == 1) return v[0];
    const size_t h = n / 2;
    return tree_sum(v, h) + tree_sum(v + h, n - h);
}

}  // namespace abc
