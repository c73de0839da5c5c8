#pragma once

#include <cstddef>
#include <functional>

namespace bsp {

/// Worker count: BSP_THREADS when set and positive, otherwise the hardware concurrency.
std::size_t worker_count();

/**
 * Runs task(i) for i in [0, n) on up to worker_count() threads. Tasks must write only to
 * their own slot of any shared output. The first exception by index is rethrown after all
 * tasks finish. Calls made from inside a worker run inline on that worker.
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

} // namespace bsp
