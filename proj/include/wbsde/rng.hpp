#pragma once

#include <array>
#include <cstdint>

namespace wbsde::rng {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A draw is a
// pure function of (key, counter), so any partition of work across threads
// reproduces the same stream bit-exactly.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::uint64_t key);

/// Draw #idx of the (seed, path, node) stream, uniform on (0,1).
double uniform01(std::uint64_t seed, std::uint64_t path, std::uint32_t node,
                 std::uint32_t idx);

/// Standard normal deviate via the inverse CDF of uniform01. Monotone in the
/// underlying uniform; reproducible independent of evaluation order.
double normal(std::uint64_t seed, std::uint64_t path, std::uint32_t node,
              std::uint32_t idx);

/// Seed of an independent substream, e.g. for nested simulation or
/// bootstrap resampling. Distinct (purpose, a, b) give distinct streams.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t purpose,
                            std::uint64_t a, std::uint64_t b = 0);

// Substream purposes used across the library.
inline constexpr std::uint64_t kStreamInner = 1;      // nested Monte Carlo
inline constexpr std::uint64_t kStreamBootstrap = 2;  // bootstrap resampling
inline constexpr std::uint64_t kStreamSampler = 3;    // assumption sampling

/// Inverse standard normal CDF on (0,1). Cubic-Hermite interpolation on a
/// precomputed quantile table, with an exact (Boost) fallback in the extreme
/// tails; absolute error below 1e-8 everywhere on the table range.
double inverse_normal_cdf(double u);

}  // namespace wbsde::rng
