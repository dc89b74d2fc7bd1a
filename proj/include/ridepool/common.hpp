#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ridepool {

// Mirrors rp_status in ridepool.h; values must stay in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kIo = 3,
  kFormat = 4,
  kShapeMismatch = 5,
  kInvariant = 6,
  kNumeric = 7,
  kInternal = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Planar coordinates in kilometres.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double manhattan_km(Point a, Point b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

// splitmix64 finaliser; used to derive independent RNG streams from
// (seed, index) pairs.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace ridepool
