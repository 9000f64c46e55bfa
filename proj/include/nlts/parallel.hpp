#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace nlts {

/// Static-partition parallel map over [begin, end). Each index writes only its
/// own output slot, so results do not depend on the worker count. The first
/// exception thrown by any index is rethrown after all workers join.
inline void parallel_for(int begin, int end, int workers,
                         const std::function<void(int)>& body) {
  const int count = end - begin;
  if (count <= 0) return;
  if (workers < 1) workers = 1;
  if (workers == 1 || count == 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  workers = std::min(workers, count);
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto run_block = [&](int w) {
    const int lo = begin + static_cast<int>(static_cast<long long>(count) * w / workers);
    const int hi =
        begin + static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
    for (int i = lo; i < hi; ++i) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) threads.emplace_back(run_block, w);
  run_block(0);
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace nlts
