#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace aggmin {

/// Worker-count setting for the pairwise sums.
///
/// Work is always cut into the same chunks (a function of problem size only),
/// and partial results are merged in chunk order, so output is bitwise
/// identical for every thread count.
struct Workers {
  unsigned threads = 1;

  /// AGGMIN_THREADS if set to a positive integer, otherwise all cores.
  static Workers from_env() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("AGGMIN_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v > 0) return {static_cast<unsigned>(std::min<long>(v, hw))};
      } catch (...) {
      }
    }
    return {hw};
  }
};

inline constexpr std::size_t kChunkRows = 32;

inline std::size_t chunk_count(std::size_t rows) { return (rows + kChunkRows - 1) / kChunkRows; }

/// Calls body(chunk_index, row_begin, row_end) for every fixed-size chunk of
/// [0, rows). Chunks are dealt round-robin to threads; body must only write
/// to per-chunk or per-row storage. If bodies throw, the exception from the
/// lowest-numbered failing chunk is rethrown after all threads join.
template <class Body>
void for_each_chunk(std::size_t rows, Workers workers, Body&& body) {
  const std::size_t chunks = chunk_count(rows);
  const std::size_t nthreads = std::min<std::size_t>(std::max(1u, workers.threads), chunks);
  if (nthreads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t b = c * kChunkRows;
      body(c, b, std::min(rows, b + kChunkRows));
    }
    return;
  }
  std::vector<std::exception_ptr> failures(chunks);
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t c = first; c < chunks; c += stride) {
      const std::size_t b = c * kChunkRows;
      try {
        body(c, b, std::min(rows, b + kChunkRows));
      } catch (...) {
        failures[c] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(nthreads - 1);
    for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back([&, t] { run(t, nthreads); });
    run(0, nthreads);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace aggmin
