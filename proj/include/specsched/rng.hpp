// Counter-based random numbers: Philox4x32-10 (Salmon et al., SC'11).
//
// Stream splitting: the 64-bit seed is the key; the 128-bit counter is
// (block_lo, block_hi, stream_lo, stream_hi). A stream is typically a sample
// index, so draws for sample i depend only on (seed, i) and never on how the
// work is partitioned across threads.
//
// Each counter block yields four 32-bit words = two 53-bit uniforms in (0, 1).
// Normals use Box-Muller on one block: r = sqrt(-2 ln u1), (r cos 2pi u2,
// r sin 2pi u2).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace specsched {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  /// Uniform in the open interval (0, 1).
  double uniform() {
    if (uniform_left_ == 0) {
      const auto w = next_block();
      buffer_[0] = to_unit(w[0], w[1]);
      buffer_[1] = to_unit(w[2], w[3]);
      uniform_left_ = 2;
    }
    return buffer_[2 - uniform_left_--];
  }

  /// Standard normal.
  double normal() {
    if (normal_left_ == 0) {
      const auto w = next_block();
      const double u1 = to_unit(w[0], w[1]);
      const double u2 = to_unit(w[2], w[3]);
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double theta = 2.0 * std::numbers::pi * u2;
      normals_[0] = r * std::cos(theta);
      normals_[1] = r * std::sin(theta);
      normal_left_ = 2;
    }
    return normals_[2 - normal_left_--];
  }

 private:
  Philox4x32::Counter next_block() {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_),
                                  static_cast<std::uint32_t>(block_ >> 32),
                                  static_cast<std::uint32_t>(stream_),
                                  static_cast<std::uint32_t>(stream_ >> 32)};
    ++block_;
    return Philox4x32::apply(ctr, key_);
  }

  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<double, 2> buffer_{};
  std::array<double, 2> normals_{};
  int uniform_left_ = 0;
  int normal_left_ = 0;
};

}  // namespace specsched
