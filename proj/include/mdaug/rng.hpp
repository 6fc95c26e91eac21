#ifndef MDAUG_RNG_HPP
#define MDAUG_RNG_HPP

#include <cstdint>

namespace mdaug::stats {

// Counter-based splittable generator. Each (seed, stream) pair keys an
// independent sequence: draw i is a SplitMix64 finalizer applied to
// key + i*gamma, so sequences are reproducible across platforms and
// streams can be handed out to parallel workers without coupling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(derive_key(seed, stream)) {}

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = key_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; second variate is cached.
  double next_gaussian() noexcept;

  // Uniform integer on [0, n); unbiased via rejection. n must be > 0.
  std::uint64_t next_below(std::uint64_t n) noexcept;

  static std::uint64_t derive_key(std::uint64_t seed,
                                  std::uint64_t stream) noexcept {
    std::uint64_t a = mix(seed ^ 0x9E3779B97F4A7C15ULL);
    std::uint64_t b = mix(stream + 0xD1B54A32D192ED03ULL);
    return mix(a ^ (b * 0xBF58476D1CE4E5B9ULL));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_gaussian_ = 0.0;
  bool have_cached_ = false;
};

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) noexcept {
  return Rng(seed, stream);
}

// Deterministic combiner for deriving sub-stream ids (run indices,
// per-stage labels) from a parent stream id.
inline std::uint64_t derive_stream(std::uint64_t parent,
                                   std::uint64_t child) noexcept {
  return Rng::derive_key(parent, child);
}

}  // namespace mdaug::stats

#endif  // MDAUG_RNG_HPP
