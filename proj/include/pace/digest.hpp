#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pace {

// 64-bit FNV-1a. Used for content digests in scripts and trajectories, not for security.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

inline std::string digest_hex(std::string_view data) { return to_hex(fnv1a64(data)); }

// SplitMix64 finalizer; good avalanche for counter-based random streams.
std::uint64_t mix64(std::uint64_t x);

// Uniform double in [0, 1) from a 64-bit word.
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace pace
