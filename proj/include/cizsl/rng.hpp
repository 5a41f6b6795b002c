#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

#include "cizsl/error.hpp"

namespace cizsl {

/// Per-purpose stream ids. Each consumer of randomness draws from its own
/// stream so that changing how often one consumer draws leaves the others
/// untouched.
enum class Stream : std::uint64_t {
  Init = 1,
  Noise = 2,
  Alpha = 3,
  Shuffle = 4,
  GpEpsilon = 5,
  Synthetic = 6,
  Split = 7,
  Eval = 8,
};

/// Counter-based generator: draw i is a pure hash of (seed, stream, i).
/// Copying a stream snapshots it, and a copy replays the same sequence.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_(stream_id) {}
  RngStream(std::uint64_t seed, Stream stream)
      : RngStream(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t key = mix(seed_ ^ mix(stream_ * 0xD1B54A32D192ED03ull + 0x9E3779B97F4A7C15ull));
    return mix(key + (counter_++) * 0x9E3779B97F4A7C15ull);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double next_unit() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Child stream for an independent sub-task (e.g. one lambda in a sweep).
  RngStream derive(std::uint64_t salt) const noexcept {
    return RngStream(mix(seed_ + 0x632BE59BD9B4E019ull * (salt + 1)), stream_);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

inline double sample_uniform(RngStream& rng, double lo, double hi) {
  require(lo < hi, ErrorKind::InvalidInput, "sample_uniform: lo must be < hi");
  double u = lo + (hi - lo) * rng.next_unit();
  return u < hi ? u : lo;
}

/// Box-Muller on two unit draws; no reliance on std:: distributions, whose
/// output is implementation-defined.
inline double sample_standard_normal(RngStream& rng) {
  double u1 = rng.next_unit();
  const double u2 = rng.next_unit();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sample_gaussian(RngStream& rng, Eigen::Index n) {
  require(n >= 1, ErrorKind::InvalidInput, "sample_gaussian: n must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = static_cast<Scalar>(sample_standard_normal(rng));
  return out;
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sample_gaussian(RngStream& rng, Eigen::Index rows,
                                                                       Eigen::Index cols) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = static_cast<Scalar>(sample_standard_normal(rng));
  return out;
}

/// Uniform integer in [0, n).
inline std::size_t sample_index(RngStream& rng, std::size_t n) {
  require(n >= 1, ErrorKind::InvalidInput, "sample_index: empty range");
  return static_cast<std::size_t>(rng.next_unit() * static_cast<double>(n)) % n;
}

}  // namespace cizsl
