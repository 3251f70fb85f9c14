#include "cbound/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace cbound {

std::size_t worker_count() {
  if (const char* env = std::getenv("CBOUND_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
      // fall through to the hardware default
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double tree_sum(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::size_t n = values.size();
  while (n > 1) {
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i + half < n; ++i) values[i] += values[i + half];
    n = half;
  }
  return values[0];
}

std::vector<double> chunked_sums(std::size_t count, std::size_t width,
                                 const std::function<void(std::size_t, double*)>& fn) {
  const std::size_t chunks = (count + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(chunks * width, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    double* acc = partial.data() + c * width;
    std::vector<double> addend(width);
    const std::size_t end = std::min(count, (c + 1) * kReduceChunk);
    for (std::size_t i = c * kReduceChunk; i < end; ++i) {
      std::fill(addend.begin(), addend.end(), 0.0);
      fn(i, addend.data());
      for (std::size_t k = 0; k < width; ++k) acc[k] += addend[k];
    }
  });
  std::vector<double> out(width);
  std::vector<double> column(chunks);
  for (std::size_t k = 0; k < width; ++k) {
    for (std::size_t c = 0; c < chunks; ++c) column[c] = partial[c * width + k];
    out[k] = tree_sum(column);
  }
  return out;
}

double chunked_sum(std::size_t count, const std::function<double(std::size_t)>& fn) {
  return chunked_sums(count, 1, [&](std::size_t i, double* out) { out[0] = fn(i); })[0];
}

}  // namespace cbound
