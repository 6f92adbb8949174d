#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace descentlab {

// descentlab-rng v1.
//
// All randomness in the project flows through this generator so results are
// reproducible across platforms and independent of the standard library's
// distribution implementations. The stream is SplitMix64; Gaussians use
// Box-Muller; integer ranges use rejection sampling (no modulo bias).
//
// Substreams are derived with derive_key(), which folds an arbitrary list of
// 64-bit parts through the SplitMix64 finalizer. Keying a fresh Rng per
// logical unit (feature row, anchor column, epoch shuffle, ...) makes every
// unit independent of evaluation order, which is what the nested-feature and
// parallel-sweep guarantees rest on.

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8824a3d7f56fcd5fULL;
  for (std::uint64_t p : parts) h = mix64(h ^ p);
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Strictly inside (0, 1): (k + 0.5) / 2^53 for k in [0, 2^53).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_gaussian();

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace descentlab
