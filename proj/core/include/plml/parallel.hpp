#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace plml {

// Number of worker threads for path- and cell-parallel loops.  The
// PLML_THREADS environment variable overrides hardware concurrency;
// unparseable or non-positive values fall back to 1.
std::size_t worker_count();

// Runs fn(chunk_index, begin, end) for every chunk of [0, n).  Chunk
// boundaries depend only on n and chunk_size, never on the worker count, so
// per-chunk accumulators combined in chunk order yield results that are
// independent of scheduling.  Exceptions thrown by fn are captured and
// rethrown on the calling thread (first one wins).
void parallel_chunks(
    std::size_t n, std::size_t chunk_size,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Sum by recursive halving.  Deterministic for a fixed ordering and better
// conditioned than running accumulation, which keeps parallel reductions
// reproducible bit for bit.
double pairwise_sum(const double* data, std::size_t n);
double pairwise_sum(const std::vector<double>& v);

}  // namespace plml
