#include "mdaug/rng.hpp"

#include <cmath>

namespace mdaug::stats {

double Rng::next_gaussian() noexcept {
  if (have_cached_) {
    have_cached_ = false;
    return cached_gaussian_;
  }
  double u1 = next_double();
  double u2 = next_double();
  if (u1 <= 0.0) u1 = 0x1.0p-53;  // log(0) guard; next_double can return 0
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_gaussian_ = r * std::sin(theta);
  have_cached_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::next_below(std::uint64_t n) noexcept {
  if (n <= 1) return 0;
  // Reject draws in the truncated top interval so x % n is unbiased.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= threshold) return x % n;
  }
}

}  // namespace mdaug::stats
