#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace cbound {

// Worker count: CBOUND_WORKERS if set and positive, else hardware threads.
std::size_t worker_count();

// Runs fn(i) for i in [0, count) on up to worker_count() threads. Each index
// runs exactly once; the first exception thrown is rethrown after join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

// Pairwise tree sum; the order depends only on values.size().
double tree_sum(std::vector<double> values);

// Fixed chunk size for reductions, independent of worker count so that
// chunked sums are reproducible across machines.
inline constexpr std::size_t kReduceChunk = 2048;

// Sums fn(i) over [0, count): sequential inside fixed-size chunks, chunks in
// parallel, chunk totals combined with tree_sum. Bitwise deterministic.
double chunked_sum(std::size_t count, const std::function<double(std::size_t)>& fn);

// Same traversal, several accumulators at once (fn writes `width` addends).
std::vector<double> chunked_sums(std::size_t count, std::size_t width,
                                 const std::function<void(std::size_t, double*)>& fn);

}  // namespace cbound
