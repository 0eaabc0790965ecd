// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace hdrsplat {

// Number of worker threads used by data-parallel loops. 0 means hardware concurrency.
void setThreadCount(int n);
int threadCount();

// Runs body(chunk) for chunk in [0, chunks). The chunk partition is chosen by the caller and
// must not depend on the thread count; callers that reduce per-chunk partials in chunk order
// get bit-identical results for any number of threads.
void parallelForChunks(std::size_t chunks, const std::function<void(std::size_t)> &body);

} // namespace hdrsplat
