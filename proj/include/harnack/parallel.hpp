#pragma once

// Path-parallel driver. Work is handed out in index chunks, every result is
// written to its own slot and reductions run in a fixed order afterwards, so
// the thread count never changes a single bit of the output.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "harnack/errors.hpp"

namespace harnack {

struct Execution {
    int threads = 0; // 0: HARNACK_LAB_THREADS, then hardware concurrency

    int resolve() const {
        if (threads > 0) return threads;
        if (const char* env = std::getenv("HARNACK_LAB_THREADS")) {
            try {
                const int n = std::stoi(env);
                if (n > 0) return n;
            } catch (const std::exception&) {
            }
            throw InvalidArgument(std::string("HARNACK_LAB_THREADS must be a positive integer, got '") + env + "'");
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

// Calls fn(i) for i in [0, n). If any call throws, the exception from the
// smallest failing index is rethrown after all workers stop.
template <class Fn>
void parallel_for(long n, const Execution& exec, Fn&& fn) {
    if (n <= 0) return;
    const int threads = static_cast<int>(std::min<long>(exec.resolve(), n));
    if (threads == 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    constexpr long chunk = 64;
    std::atomic<long> next{0};
    std::atomic<long> stop_at{std::numeric_limits<long>::max()};
    std::mutex error_mutex;
    long error_index = std::numeric_limits<long>::max();
    std::exception_ptr error;

    auto worker = [&] {
        for (;;) {
            const long begin = next.fetch_add(chunk);
            if (begin >= n || begin >= stop_at.load()) return;
            const long end = std::min(n, begin + chunk);
            for (long i = begin; i < end; ++i) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (i < error_index) {
                        error_index = i;
                        error = std::current_exception();
                        stop_at.store(i);
                    }
                    break;
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads) - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// Pairwise summation in a fixed tree order.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

} // namespace harnack
