#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fairproj {

/// Samples per work chunk. Chunk boundaries depend only on the sample index,
/// so any reduction folded in chunk order is independent of the worker count.
inline constexpr std::size_t kChunkSamples = 256;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kChunkSamples) {
  return (n + chunk - 1) / chunk;
}

/**
 * Fixed-size pool of persistent worker threads. The calling thread takes part
 * in every run, so a pool of size 1 spawns no threads at all.
 */
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const noexcept { return threads_.size() + 1; }

  /// Calls fn(c) once for each c in [0, chunks) and blocks until all are done.
  /// If any call throws, the exception from the lowest chunk index is rethrown.
  void run(std::size_t chunks, const std::function<void(std::size_t)>& fn);

 private:
  void worker_loop();
  void drain();

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t chunks_ = 0;
  std::size_t next_ = 0;
  std::size_t active_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  std::size_t error_chunk_ = 0;
};

/**
 * Ordered reduction over sample chunks.
 *
 * `compute(chunk, partial)` fills a zero-initialized partial of length `width`
 * for one chunk; partials are then added into `out` strictly in chunk order.
 * Partials are materialized a bounded wave at a time.
 */
void ordered_reduce(WorkerPool& pool, std::size_t chunks, std::size_t width,
                    const std::function<void(std::size_t, double*)>& compute,
                    double* out);

}  // namespace fairproj
