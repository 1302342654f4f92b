#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace compnet {

/// Shape or channel-count disagreements between operands.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values, non-SPD covariance, diverging training.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Corrupt or truncated files, missing datasets.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad keys, malformed config files, invalid switch values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// ---------------------------------------------------------------------------
// Worker pool. COMPNET_THREADS caps the worker count (0 or unset = hardware
// concurrency). Work items always own disjoint output ranges, so results are
// bit-identical regardless of scheduling.
// ---------------------------------------------------------------------------

class ThreadPool {
  struct Job {
    const std::function<void(int64_t)>* fn = nullptr;
    std::atomic<int64_t> next{0};
    int64_t total = 0;
    std::atomic<int64_t> remaining{0};
    std::mutex m;
    std::condition_variable done;
    std::exception_ptr err;
  };

 public:
  static ThreadPool& instance() {
    static ThreadPool pool(env_thread_count());
    return pool;
  }

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  /// Runs fn(i) for i in [0, count); blocks until every item finished.
  /// Exceptions from items are rethrown on the calling thread.
  void parallel_for(int64_t count, const std::function<void(int64_t)>& fn) {
    if (count <= 0) return;
    if (count == 1 || workers_.empty()) {
      for (int64_t i = 0; i < count; ++i) fn(i);
      return;
    }
    auto job = std::make_shared<Job>();
    job->fn = &fn;
    job->total = count;
    job->remaining.store(count);
    {
      std::lock_guard lock(mutex_);
      current_ = job;
      ++generation_;
    }
    cv_.notify_all();
    run(*job);  // caller participates
    {
      std::unique_lock lock(job->m);
      job->done.wait(lock, [&] { return job->remaining.load() == 0; });
    }
    {
      std::lock_guard lock(mutex_);
      if (current_ == job) current_.reset();
    }
    if (job->err) std::rethrow_exception(job->err);
  }

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

 private:
  explicit ThreadPool(int n) {
    for (int i = 1; i < n; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  static int env_thread_count() {
    const char* env = std::getenv("COMPNET_THREADS");
    int n = env ? std::atoi(env) : 0;
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return n > 0 ? n : 1;
  }

  static void run(Job& job) {
    while (true) {
      int64_t i = job.next.fetch_add(1, std::memory_order_relaxed);
      if (i >= job.total) return;
      try {
        (*job.fn)(i);
      } catch (...) {
        std::lock_guard lock(job.m);
        if (!job.err) job.err = std::current_exception();
      }
      if (job.remaining.fetch_sub(1) == 1) {
        std::lock_guard lock(job.m);
        job.done.notify_all();
      }
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    while (true) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = current_;
      }
      if (job) run(*job);
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::shared_ptr<Job> current_;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

inline void parallel_for(int64_t count, const std::function<void(int64_t)>& fn) {
  ThreadPool::instance().parallel_for(count, fn);
}

}  // namespace compnet
