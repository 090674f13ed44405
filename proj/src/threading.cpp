#include "uqpe/threading.hpp"

#include <atomic>
#include <exception>
#include <mutex>

namespace uqpe {

unsigned hardware_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t block = 1;  // tasks here are coarse (a replication, a fit)
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t start = next.fetch_add(block);
            if (start >= n) return;
            const std::size_t stop = std::min(n, start + block);
            for (std::size_t i = start; i < stop; ++i) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        }
    };

    std::vector<std::thread> pool;
    const unsigned use = std::min<std::size_t>(threads, n);
    pool.reserve(use);
    for (unsigned t = 0; t < use; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace uqpe
