#pragma once

#include <cstdint>
#include <functional>

namespace iie {

// Worker cap: IIE_THREADS env if set, else hardware concurrency.
int max_workers();

// Force a worker count (0 = back to default). Used by --deterministic.
void set_max_workers(int n);

// Runs fn(i) for i in [0, n). Work is split by static ownership (worker w
// takes i with i % W == w) so every index is computed by exactly one thread
// and results never depend on the worker count. Falls back to an inline loop
// when one worker suffices.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace iie
