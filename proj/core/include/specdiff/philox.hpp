#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "specdiff/types.hpp"

// Philox4x32-10 counter-based random generator.  Chosen because substreams
// are free: the output is a pure function of (key, counter), so a seed plus a
// stream id plus a draw index fully determine every variate.  Trajectory
// generation uses stream 0; photon generation uses stream (segment index + 1),
// which makes parallel segment generation reproducible by construction.

namespace specdiff {

struct PhiloxBlock {
  std::array<std::uint32_t, 4> x;
};

// One 10-round Philox4x32 block: counter (4x u32) and key (2x u32) to 128
// output bits.
inline PhiloxBlock philox4x32(std::array<std::uint32_t, 4> ctr,
                              std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += W0;
      key[1] += W1;
    }
    std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return {ctr};
}

// Sequential view over one substream: key = seed, counter high half = stream
// id, counter low half = block index.  Each block yields two u64 draws.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::uint64_t next_u64() {
    if (phase_ == 0) {
      std::array<std::uint32_t, 4> ctr = {
          static_cast<std::uint32_t>(block_),
          static_cast<std::uint32_t>(block_ >> 32),
          static_cast<std::uint32_t>(stream_),
          static_cast<std::uint32_t>(stream_ >> 32)};
      cached_ = philox4x32(ctr, key_).x;
      ++block_;
    }
    std::uint64_t v = (static_cast<std::uint64_t>(cached_[2 * phase_ + 1]) << 32) |
                      cached_[2 * phase_];
    phase_ ^= 1;
    return v;
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as the argument of log().
  double next_double_open() { return 1.0 - next_double(); }

  // Standard normal via Box-Muller; the spare is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double_open();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = two_pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Exponential with mean 1.
  double next_exponential() { return -std::log(next_double_open()); }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> cached_ = {};
  int phase_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace specdiff
