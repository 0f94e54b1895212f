#pragma once

#include <cstddef>
#include <functional>

namespace scis {

/// Worker cap from SCIS_THREADS (default 1, clamped to [1, 64]).
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads. Work is split
/// into contiguous chunks; callers write results by index, so the outcome
/// never depends on the number of threads. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace scis
