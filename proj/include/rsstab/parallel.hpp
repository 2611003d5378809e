#pragma once

// Deterministic per-path parallelism: results are stored by path index and
// reduced in a fixed pairwise order, so totals do not depend on the number
// of workers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace rsstab {

// Worker count used when a caller passes 0.
unsigned default_threads() noexcept;

// Calls fn(i) for i in [0, n) over `threads` workers (0 = default). Each
// index is visited exactly once; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = default_threads();
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

// Pairwise (tree) summation in index order.
double pairwise_sum(std::span<const double> values) noexcept;

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // standard error of the mean
    double variance = 0.0;  // sample variance (n-1 denominator)
    std::size_t n = 0;
};

// Mean, variance and standard error with deterministic pairwise reductions.
MeanEstimate estimate_mean(std::span<const double> values);

}  // namespace rsstab
