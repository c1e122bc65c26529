#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace hes {

/// ceil(x) that does not round up products which are integral in exact
/// arithmetic but land a few ulps above an integer in binary floating point
/// (0.005 * 200 must give 1, not 2).
inline std::size_t guarded_ceil(double x) {
  if (x <= 0.0) return 0;
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(x));
}

/// Shared count rule for tokens and samples: m = min(total, max(1, ceil(fraction * total))).
/// Returns 0 only for an empty population.
inline std::size_t count_for_fraction(double fraction, std::size_t total) {
  if (total == 0) return 0;
  const std::size_t m = std::max<std::size_t>(1, guarded_ceil(fraction * static_cast<double>(total)));
  return std::min(total, m);
}

}  // namespace hes
