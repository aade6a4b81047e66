#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace csgd {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds (Salmon et al. counter-based generator).
inline Philox4x32Counter philox4x32_10(Philox4x32Counter c, Philox4x32Key k) noexcept {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

// Stream purposes, so data simulation and optimization never share draws.
namespace stream_domain {
inline constexpr std::uint32_t sgd = 1;
inline constexpr std::uint32_t data = 2;
inline constexpr std::uint32_t holdout = 3;
inline constexpr std::uint32_t truth = 4;
inline constexpr std::uint32_t test = 100;
}  // namespace stream_domain

// Keyed by the 64-bit seed; the counter carries (block, domain, replication, index),
// so every (seed, domain, replication, index) tuple is an independent stream.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t seed, std::uint32_t domain, std::uint32_t replication,
             std::uint32_t index) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, domain, replication, index} {}

  explicit Philox4x32(std::uint64_t seed = 0) noexcept : Philox4x32(seed, 0, 0, 0) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ == 4) {
      buf_ = philox4x32_10(ctr_, key_);
      ++ctr_[0];
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  std::uint64_t next64() noexcept {
    const std::uint64_t hi = (*this)();
    return (hi << 32) | (*this)();
  }

 private:
  Philox4x32Key key_;
  Philox4x32Counter ctr_;
  Philox4x32Counter buf_{};
  int pos_ = 4;
};

// Uniform on [0,1) with 53 random bits.
template <class Rng>
double uniform01(Rng& rng) {
  const std::uint64_t hi = rng(), lo = rng();
  return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
}

// Uniform on (0,1].
template <class Rng>
double uniform01_open_low(Rng& rng) {
  return 1.0 - uniform01(rng);
}

// Unbiased integer in [0, bound) via Lemire's multiply-shift with rejection.
template <class Rng, class I>
I uniform_index(Rng& rng, I bound) {
  const auto b = static_cast<std::uint64_t>(bound);
  auto draw = [&rng] {
    const std::uint64_t hi = rng(), lo = rng();
    return (hi << 32) | lo;
  };
  unsigned __int128 m = static_cast<unsigned __int128>(draw()) * b;
  auto low = static_cast<std::uint64_t>(m);
  if (low < b) {
    const std::uint64_t threshold = (0 - b) % b;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(draw()) * b;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<I>(m >> 64);
}

}  // namespace csgd
