#pragma once

#include <cstddef>
#include <functional>

namespace visern {

/// Worker count from VISERN_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

/// Runs body(i) for i in [0, count). Each index must write only to its own
/// output slot; results then do not depend on the number of workers.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace visern
