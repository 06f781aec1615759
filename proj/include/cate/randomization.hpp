#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "cate/error.hpp"
#include "cate/rng.hpp"

namespace cate {

// Treatment assignment for a complete randomization: exactly n1 ones.
using Assignment = std::vector<std::uint8_t>;

// Number of size-n1 subsets of n units, saturating at cap+1 so callers can
// test "more than cap" without overflow.
inline std::uint64_t choose_capped(std::uint64_t n, std::uint64_t n1,
                                   std::uint64_t cap) {
  if (n1 > n) return 0;
  if (n1 > n - n1) n1 = n - n1;
  unsigned __int128 c = 1;
  for (std::uint64_t i = 1; i <= n1; ++i) {
    c = c * (n - n1 + i) / i;  // exact: prefix products are binomials
    if (c > cap) return cap + 1;
  }
  return static_cast<std::uint64_t>(c);
}

// Draw one assignment uniformly over all size-n1 subsets via a partial
// Fisher-Yates shuffle: only the first n1 slots are settled, each swap uses
// one unbiased integer draw.
inline Assignment complete_randomization(std::size_t n, std::size_t n1,
                                         RngStream& rng) {
  if (n < 2 || n1 < 1 || n1 >= n)
    throw Error(ErrorKind::InvalidArmSize,
                "complete_randomization requires 1 <= n1 <= n-1 and n >= 2");
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n1; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  Assignment z(n, 0);
  for (std::size_t i = 0; i < n1; ++i) z[idx[i]] = 1;
  return z;
}

// All size-n1 assignments, treated-index combinations in lexicographic order
// (so the assignment vectors themselves descend lexicographically, e.g.
// n=3, n1=1 gives [1,0,0], [0,1,0], [0,0,1]). Refuses when the count
// exceeds cap.
inline std::vector<Assignment> enumerate_assignments(std::size_t n, std::size_t n1,
                                                     std::uint64_t cap = 1000000) {
  if (n < 2 || n1 < 1 || n1 >= n)
    throw Error(ErrorKind::InvalidArmSize,
                "enumerate_assignments requires 1 <= n1 <= n-1 and n >= 2");
  const std::uint64_t count = choose_capped(n, n1, cap);
  if (count > cap)
    throw Error(ErrorKind::TooManyAssignments,
                "assignment count exceeds cap of " + std::to_string(cap));

  std::vector<Assignment> out;
  out.reserve(count);
  std::vector<std::size_t> comb(n1);
  std::iota(comb.begin(), comb.end(), 0);
  while (true) {
    Assignment z(n, 0);
    for (std::size_t pos : comb) z[pos] = 1;
    out.push_back(std::move(z));
    // advance to the next combination
    std::size_t i = n1;
    while (i > 0 && comb[i - 1] == n - n1 + i - 1) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < n1; ++j) comb[j] = comb[j - 1] + 1;
  }
  return out;
}

}  // namespace cate
