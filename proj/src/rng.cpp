#include "hes/rng.hpp"

#include <numeric>
#include <utility>

namespace hes {

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  // Forward Fisher-Yates so that every prefix is already a uniform draw.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

}  // namespace hes
