#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cmpplab {

/// Work is always cut into chunks of this many indices regardless of the
/// thread count, so per-chunk reductions are identical for any thread count.
inline constexpr std::size_t kChunkSize = 4096;

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Calls body(chunk_index, begin, end) for every chunk of [0, n). Chunks are
/// dealt round-robin to `threads` workers. If any chunk throws, the exception
/// from the lowest-numbered failing chunk is rethrown.
template <class Body>
void for_each_chunk(std::size_t n, unsigned threads, Body&& body) {
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  if (chunks == 0) return;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), chunks));
  std::vector<std::exception_ptr> errors(chunks);

  auto run = [&](unsigned worker) {
    for (std::size_t c = worker; c < chunks; c += workers) {
      try {
        const std::size_t begin = c * kChunkSize;
        body(c, begin, std::min(n, begin + kChunkSize));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Deterministic map-reduce: each chunk folds its indices in order into a
/// fresh accumulator, and chunk results are merged in chunk order.
template <class Acc, class Fold>
Acc chunked_reduce(std::size_t n, unsigned threads, Fold&& fold) {
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  std::vector<Acc> partial(chunks);
  for_each_chunk(n, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fold(partial[c], i);
  });
  Acc total{};
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace cmpplab
