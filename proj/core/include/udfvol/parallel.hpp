#pragma once

#include <cstdint>
#include <functional>

namespace udfvol {

// Number of worker threads. Reads UDFVOL_THREADS once; falls back to
// hardware_concurrency. Always at least 1.
int thread_count();

// Runs fn(begin, end) over [0, n) split into chunks. The chunk grid depends
// only on n (not on the thread count), so per-chunk results can be reduced
// in index order to give run-to-run identical floating point output.
void parallel_chunks(int64_t n, int64_t chunk,
                     const std::function<void(int64_t, int64_t)>& fn);

// Deterministic per-subsystem seed derivation (splitmix64 mixing).
uint64_t derive_seed(uint64_t base, uint64_t salt);

}  // namespace udfvol
