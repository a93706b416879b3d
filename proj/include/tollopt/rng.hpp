#pragma once

#include <cstdint>

namespace tollopt {

// Counter-based 64-bit generator so any run (or reimplementation) with the
// same seed reproduces the same stream without carrying state:
//   value(seed, n) = mix64(seed + (n + 1) * 0x9e3779b97f4a7c15)
// where mix64 is the 64-bit finalizer
//   z ^= z >> 33; z *= 0xff51afd7ed558ccd;
//   z ^= z >> 33; z *= 0xc4ceb9fe1a85ec53; z ^= z >> 33.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

inline std::uint64_t counter_value(std::uint64_t seed, std::uint64_t counter) {
  return mix64(seed + (counter + 1) * 0x9e3779b97f4a7c15ULL);
}

// Uniform double in [0, 1) from the top 53 bits.
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  return static_cast<double>(counter_value(seed, counter) >> 11) * 0x1.0p-53;
}

}  // namespace tollopt
