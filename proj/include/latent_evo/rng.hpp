#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace latent_evo {

// SplitMix64 finalizer, used to derive stream ids from structured tags.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(mix64(a) ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

/// PCG32 (XSH-RR, 64-bit state) addressed by (seed, stream).
///
/// Every draw sequence is a pure function of the pair; distinct streams give
/// statistically independent sequences. Gaussian draws use the basic
/// Box-Muller transform on two 53-bit uniforms, emitting the cosine branch
/// first and the cached sine branch second.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : seed_(seed), stream_(stream) {
    inc_ = (stream << 1u) | 1u;
    state_ = 0;
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  // Fresh generator with the same seed on a stream derived from this one.
  SeededRng substream(std::uint64_t tag) const noexcept {
    return SeededRng(seed_, mix64(stream_, tag));
  }
  SeededRng substream(std::uint64_t tag, std::uint64_t index) const noexcept {
    return SeededRng(seed_, mix64(mix64(stream_, tag), index));
  }

  std::uint32_t next_u32() noexcept {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32u) | next_u32();
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11u) * 0x1.0p-53;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream tags used by the engines and the runner.
namespace streams {
inline constexpr std::uint64_t kInitialPopulation = 0x1001;
inline constexpr std::uint64_t kBaseNoise = 0x1002;
inline constexpr std::uint64_t kPropose = 0x1003;
inline constexpr std::uint64_t kBestOfN = 0x1004;
inline constexpr std::uint64_t kZeroOrderInit = 0x1005;
inline constexpr std::uint64_t kZeroOrderStep = 0x1006;
inline constexpr std::uint64_t kDecoder = 0x1007;
inline constexpr std::uint64_t kInstance = 0x1008;
inline constexpr std::uint64_t kEsInit = 0x1009;
inline constexpr std::uint64_t kSphereTarget = 0x100a;
}  // namespace streams

}  // namespace latent_evo
