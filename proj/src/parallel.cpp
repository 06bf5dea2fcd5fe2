#include "hpdnet/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace hpdnet {

int worker_count() {
    if (const char* env = std::getenv("HPDNET_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap >= 1) return cap;
        } catch (const std::exception&) {
            // ignore malformed value, keep the hardware default
        }
    }
    const int n = static_cast<int>(std::thread::hardware_concurrency());
    return n < 1 ? 1 : n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    // One slot per worker; after the join the first failing chunk (lowest
    // index range) wins, so the propagated error does not depend on timing.
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([lo, hi, &fn, &err = errors[w]] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                err = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (const std::exception_ptr& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace hpdnet
