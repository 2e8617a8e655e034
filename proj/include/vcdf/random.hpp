#pragma once

// Reproducible random streams and a deterministic parallel loop.
//
// Every stream is keyed by (seed, key...) through SplitMix64 so that the
// draws of replicate g do not depend on which thread runs it.

#include <cstdint>
#include <exception>
#include <initializer_list>
#include <random>
#include <vector>

#include <omp.h>

namespace vcdf {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

/// Standard normal draws from one keyed stream.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) : engine_(stream_seed(seed, keys)) {}

  double operator()() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Runs fn(k) for k in [0, count) on `threads` threads (0 = OpenMP default).
/// Each index must write only its own output slot. The exception thrown at
/// the lowest failing index is rethrown after the loop.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count > 0 ? count : 0));
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (int k = 0; k < count; ++k) {
    try {
      fn(k);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace vcdf
