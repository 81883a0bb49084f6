#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace miq {

// Process-wide worker count for fold/row-level parallelism. Results are
// always written into index-addressed slots, so output is identical for any
// setting.
inline unsigned& thread_count() {
    static unsigned count = 1;
    return count;
}

inline void set_thread_count(unsigned n) { thread_count() = n == 0 ? 1 : n; }

// Runs f(i) for i in [0, n). The callable writes its result into a slot owned
// by index i; no reduction happens here, so the schedule cannot influence
// results.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
    const unsigned workers = thread_count();
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    const unsigned use = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    pool.reserve(use);
    for (unsigned w = 0; w < use; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    f(i);
                } catch (...) {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace miq
