#ifndef HPDNET_PARALLEL_HPP
#define HPDNET_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace hpdnet {

// Worker budget: HPDNET_THREADS when set (>= 1), otherwise the hardware
// concurrency. Values above the core count oversubscribe, which is allowed;
// results never depend on the budget.
int worker_count();

// Runs fn(i) for i in [0, n). The range is split into contiguous chunks across
// workers; every index writes only its own output slots, so the result is
// bit-identical to a serial loop regardless of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hpdnet

#endif  // HPDNET_PARALLEL_HPP
