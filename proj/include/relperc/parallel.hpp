#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace relperc {

/// Worker count: RELPERC_THREADS if set, otherwise the hardware concurrency.
inline unsigned default_threads() {
  if (const char* env = std::getenv("RELPERC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(state, i) for i in [0, n) on `threads` workers. Each worker owns
/// one state from make_state(); results must be written to per-index slots so
/// the outcome is independent of scheduling. The first exception is rethrown.
template <class MakeState, class Body>
void parallel_for(std::size_t n, unsigned threads, MakeState&& make_state, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    auto state = make_state();
    for (std::size_t i = 0; i < n; ++i) body(state, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      try {
        auto state = make_state();
        for (std::size_t i = next++; i < n; i = next++) body(state, i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Stateless convenience wrapper.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  parallel_for(n, threads, [] { return 0; }, [&](int&, std::size_t i) { body(i); });
}

}  // namespace relperc
