// Deterministic fork-join helper. Workers write disjoint slots, so results
// never depend on the thread count; UM_THREADS caps it (0 or unset = auto).
#pragma once

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

namespace umarkov {

inline unsigned thread_budget() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const char* s = std::getenv("UM_THREADS");
  if (s == nullptr || *s == '\0') return hw;
  char* end = nullptr;
  long v = std::strtol(s, &end, 10);
  if (end == s || v < 0) return hw;
  if (v == 0) return hw;
  return static_cast<unsigned>(std::min<long>(v, 256));
}

// Runs fn(begin, end) over [0, n) in contiguous chunks. Serial when the
// work is too small to amortize thread spawns or the budget is 1.
template <class Fn>
void parallel_for(std::size_t n, std::size_t min_grain, Fn&& fn) {
  if (n == 0) return;
  unsigned budget = thread_budget();
  std::size_t max_chunks = min_grain ? std::max<std::size_t>(1, n / min_grain) : n;
  std::size_t chunks = std::min<std::size_t>(budget, max_chunks);
  if (chunks <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(chunks - 1);
  std::size_t base = n / chunks, rem = n % chunks, begin = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::size_t len = base + (c < rem ? 1 : 0);
    std::size_t end = begin + len;
    if (c + 1 == chunks) {
      fn(begin, end);
    } else {
      pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    begin = end;
  }
  for (auto& t : pool) t.join();
}

}  // namespace umarkov
