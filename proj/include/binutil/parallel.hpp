#pragma once

#include <cstddef>
#include <functional>

namespace binutil {

/// Worker count: BINUTIL_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, count) on up to worker_count() threads. Each
/// index is handled exactly once; callers write results into slot i, so the
/// outcome does not depend on scheduling. The first exception thrown by any
/// body is rethrown after all workers have joined.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace binutil
