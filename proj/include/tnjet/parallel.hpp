#pragma once

#include <cstddef>
#include <functional>

namespace tnjet {

/// Worker cap: an active ScopedWorkerLimit, else TNT_THREADS if set and
/// positive, else the hardware concurrency.
int worker_count();

/// Overrides worker_count() for the lifetime of the object (0 = no override).
class ScopedWorkerLimit {
 public:
  explicit ScopedWorkerLimit(int workers);
  ~ScopedWorkerLimit();
  ScopedWorkerLimit(const ScopedWorkerLimit&) = delete;
  ScopedWorkerLimit& operator=(const ScopedWorkerLimit&) = delete;

 private:
  int previous_;
};

/// Runs fn(i) for i in [0, count) on up to `workers` threads (0 = worker_count()).
/// Each index runs exactly once; callers write results into per-index slots, so
/// the outcome never depends on the thread count. The first exception thrown by
/// any task is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, int workers = 0);

}  // namespace tnjet
