#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace agentfield {

/// Largest supported state-space dimension. Unused trailing coordinates are
/// kept at zero so Euclidean distances can be taken over the full array.
inline constexpr std::size_t kMaxDim = 3;

using Point = std::array<double, kMaxDim>;
using Rng = std::mt19937_64;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a finite structure (function net, mixture) would exceed its budget.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kMaxDim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// SplitMix64 finalizer, used to derive independent stream seeds from a
// master seed and a counter.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for stream `index` of family `tag` under `master`. Independent of
/// scheduling, so runs are reproducible at any parallelism level.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
  return mix64(mix64(master ^ mix64(tag)) + index);
}

/// 64-bit FNV-1a hash.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Rng make_stream(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
  return Rng(derive_seed(master, tag, index));
}

// Stream families.
inline constexpr std::uint64_t kTagAgents = 1;
inline constexpr std::uint64_t kTagInit = 2;
inline constexpr std::uint64_t kTagResample = 3;
inline constexpr std::uint64_t kTagReplica = 4;
inline constexpr std::uint64_t kTagExperiment = 5;

}  // namespace agentfield
