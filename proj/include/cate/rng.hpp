#pragma once

#include <cstdint>
#include <random>

#include "cate/normal.hpp"

namespace cate {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic stream keyed by (master_seed, stream_index). Streams with
// distinct keys are independent for practical purposes; the same key always
// reproduces the same sequence, bit for bit, on any conforming platform.
// mt19937_64 output is fully specified by the standard; the distribution
// transforms below are implemented here because the std distribution adaptors
// are implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : master_seed_(master_seed),
        stream_index_(stream_index),
        gen_(detail::splitmix64(detail::splitmix64(master_seed) ^
                                detail::splitmix64(stream_index ^ 0x5851f42d4c957f2dULL))) {}

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1), 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1); never returns an endpoint, safe under quantile maps.
  double uniform01_open() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Unbiased integer on [0, bound). Lemire's multiply-shift with rejection.
  std::uint64_t uniform_below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(gen_()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(gen_()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal by inverse CDF; exact distributional determinism.
  double normal() { return normal_quantile(uniform01_open()); }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 gen_;
};

}  // namespace cate
