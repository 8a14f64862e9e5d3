#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace fedsched {

/// Streaming mean/variance accumulator (Welford). Mergeable, so parallel
/// replicas can be reduced in a fixed order independent of thread timing.
struct Welford {
    long long count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }

    void merge(const Welford& other) {
        if (other.count == 0) return;
        if (count == 0) {
            *this = other;
            return;
        }
        const double n1 = static_cast<double>(count);
        const double n2 = static_cast<double>(other.count);
        const double delta = other.mean - mean;
        mean += delta * n2 / (n1 + n2);
        m2 += other.m2 + delta * delta * n1 * n2 / (n1 + n2);
        count += other.count;
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }
    double stderror() const {
        return count > 1 ? stddev() / std::sqrt(static_cast<double>(count)) : 0.0;
    }
};

/// Point estimate with its Monte Carlo standard error.
struct Estimate {
    double mean = 0.0;
    double stderr_mean = 0.0;
    long long samples = 0;
};

inline int max_threads() {
    if (const char* env = std::getenv("FEDSCHED_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0,n). Each index owns its output slot, so results are
/// identical for any thread count.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
    const int threads = std::min(max_threads(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace fedsched
