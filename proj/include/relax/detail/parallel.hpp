#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace relax::detail {

/// Runs f(i) for i in [0, n) on `threads` workers with a static interleaved
/// schedule. Callers write results by index, so output order never depends on
/// the thread count. The lowest-index exception is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errs(n);
    std::vector<std::thread> pool;
    unsigned t = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    for (unsigned w = 0; w < t; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += t) {
                try {
                    f(i);
                } catch (...) {
                    errs[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace relax::detail
