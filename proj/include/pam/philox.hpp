/**
 * @file philox.hpp
 * @brief Philox4x32-10 counter-based generator and derived normal streams.
 *
 * A stream is identified by (master seed, replica, step, purpose).  The
 * 128-bit counter holds (block, step, replica, purpose) and the 64-bit key
 * holds the master seed, so any draw can be regenerated independently of
 * scheduling order.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace pam::rng {

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds applied to counter `ctr` under key `key`.
inline Block philox4x32_10(Block ctr, Key key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

/// Purpose tags occupying the fourth counter word.
enum class Purpose : std::uint32_t { Noise = 1, Bridge = 2, Calibration = 3, Synthetic = 4 };

/// Stream of uniforms and standard normals for one (seed, replica, step, purpose).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t replica, std::uint32_t step, Purpose purpose = Purpose::Noise)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        step_(step),
        replica_(replica),
        purpose_(static_cast<std::uint32_t>(purpose)) {}

  /// Uniform on the open interval (0,1) with 53 random bits.
  double uniform() {
    if (word_ == 4) refill();
    const std::uint64_t hi = buf_[word_], lo = buf_[word_ + 1];
    word_ += 2;
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by the Box-Muller transform.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  void refill() {
    buf_ = philox4x32_10({block_++, step_, replica_, purpose_}, key_);
    word_ = 0;
  }

  Key key_;
  std::uint32_t step_, replica_, purpose_;
  std::uint32_t block_ = 0;
  Block buf_{};
  int word_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pam::rng
