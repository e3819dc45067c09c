#ifndef SYNTHEON_PARALLEL_HPP
#define SYNTHEON_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace syntheon
{

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work is claimed by
/// index, so results written to slot i do not depend on scheduling. The first
/// exception thrown by any task is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn)
{
    workers = std::max(1u, workers);
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    const auto n = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    std::vector<std::jthread> pool;
    pool.reserve(n - 1);
    for (unsigned t = 1; t < n; ++t)
        pool.emplace_back(body);
    body();
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace syntheon

#endif // SYNTHEON_PARALLEL_HPP
