#include "fairproj/parallel.hpp"

#include <algorithm>

#include "fairproj/error.hpp"

namespace fairproj {

WorkerPool::WorkerPool(std::size_t workers) {
  if (workers == 0) throw InvalidArgument("WorkerPool: worker count must be >= 1");
  threads_.reserve(workers - 1);
  for (std::size_t t = 0; t + 1 < workers; ++t) {
    threads_.emplace_back([this] { worker_loop(); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::drain() {
  for (;;) {
    std::size_t c;
    const std::function<void(std::size_t)>* job;
    {
      std::lock_guard lock(mu_);
      if (next_ >= chunks_) return;
      c = next_++;
      job = job_;
    }
    try {
      (*job)(c);
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_ || c < error_chunk_) {
        error_ = std::current_exception();
        error_chunk_ = c;
      }
    }
  }
}

void WorkerPool::worker_loop() {
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mu_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      ++active_;
    }
    drain();
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    done_.notify_all();
  }
}

void WorkerPool::run(std::size_t chunks, const std::function<void(std::size_t)>& fn) {
  if (chunks == 0) return;
  if (threads_.empty()) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  {
    std::lock_guard lock(mu_);
    job_ = &fn;
    chunks_ = chunks;
    next_ = 0;
    error_ = nullptr;
    ++generation_;
  }
  wake_.notify_all();
  drain();
  std::exception_ptr err;
  {
    std::unique_lock lock(mu_);
    done_.wait(lock, [&] { return active_ == 0 && next_ >= chunks_; });
    job_ = nullptr;
    err = error_;
    error_ = nullptr;
  }
  if (err) std::rethrow_exception(err);
}

void ordered_reduce(WorkerPool& pool, std::size_t chunks, std::size_t width,
                    const std::function<void(std::size_t, double*)>& compute,
                    double* out) {
  const std::size_t wave = std::max<std::size_t>(4 * pool.size(), 16);
  std::vector<double> partials;
  for (std::size_t base = 0; base < chunks; base += wave) {
    const std::size_t count = std::min(wave, chunks - base);
    partials.assign(count * width, 0.0);
    pool.run(count, [&](std::size_t j) { compute(base + j, partials.data() + j * width); });
    for (std::size_t j = 0; j < count; ++j) {
      const double* p = partials.data() + j * width;
      for (std::size_t k = 0; k < width; ++k) out[k] += p[k];
    }
  }
}

}  // namespace fairproj
