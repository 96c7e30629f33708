#include "odfreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace odf {

namespace {

int env_thread_count() {
  if (const char* s = std::getenv("ODFREG_THREADS")) {
    int v = std::atoi(s);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::atomic<int> g_max_threads{0};  // 0 = not yet resolved

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n > 0 ? n : 1); }

int max_threads() {
  int v = g_max_threads.load();
  if (v == 0) {
    v = env_thread_count();
    g_max_threads.store(v);
  }
  return v;
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  const int workers = std::min<std::int64_t>(max_threads(), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        bool expected = false;
        if (failed.compare_exchange_strong(expected, true))
          first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) std::rethrow_exception(first_error);
}

}  // namespace odf
