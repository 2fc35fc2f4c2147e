#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace vifi {

namespace detail {
inline std::atomic<int>& job_count() {
  static std::atomic<int> jobs{1};
  return jobs;
}
}  // namespace detail

inline void set_jobs(int n) { detail::job_count().store(std::max(1, n)); }
inline int jobs() { return detail::job_count().load(); }

// Runs fn(row) for every row in [0, rows). Callers must only write to
// per-row disjoint outputs; results are then independent of the job count.
template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  const int n = std::min(jobs(), rows);
  if (n <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (int w = 0; w < n; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (int r = w; r < rows; r += n) fn(r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace vifi
