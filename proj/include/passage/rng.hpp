#pragma once

#include <array>
#include <cmath>
#include <cstdint>

// Counter-based randomness for the path simulator: a 10-round Philox 4x32
// block keyed by the seed, with (path, substep, slot) as the counter. Every
// draw is a pure function of those coordinates, so runs replay bit-exactly
// for any thread count and paths can be sharded without stream bookkeeping.

namespace passage {

namespace detail {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace detail

inline std::array<std::uint32_t, 4> philox4x32(
    std::array<std::uint32_t, 4> counter, std::uint32_t key0,
    std::uint32_t key1) {
  for (int round = 0;; ++round) {
    const std::uint64_t p0 = std::uint64_t(detail::kPhiloxM0) * counter[0];
    const std::uint64_t p1 = std::uint64_t(detail::kPhiloxM1) * counter[2];
    counter = {std::uint32_t(p1 >> 32) ^ counter[1] ^ key0,
               std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ counter[3] ^ key1,
               std::uint32_t(p0)};
    if (round == 9) break;
    key0 += detail::kPhiloxW0;
    key1 += detail::kPhiloxW1;
  }
  return counter;
}

// Which random quantity of a substep a draw feeds. The Gaussian drives the
// branch update; the coin slots decide the three bridge crossings.
enum class DrawSlot : std::uint32_t {
  gaussian = 0,
  bridge_top = 1,
  bridge_up = 2,
  bridge_down = 3,
};

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed)
      : key0_(std::uint32_t(seed)), key1_(std::uint32_t(seed >> 32)) {}

  std::array<std::uint32_t, 4> block(std::uint64_t path, std::uint32_t substep,
                                     DrawSlot slot) const {
    return philox4x32({std::uint32_t(path), std::uint32_t(path >> 32),
                       substep, std::uint32_t(slot)},
                      key0_, key1_);
  }

  // Uniform on (0, 1]: the block's low two words as a 64-bit integer x,
  // mapped as (x + 1) 2^{-64}. Zero is excluded so log(u) stays finite.
  double uniform(std::uint64_t path, std::uint32_t substep,
                 DrawSlot slot) const {
    const auto b = block(path, substep, slot);
    const std::uint64_t x = (std::uint64_t(b[1]) << 32) | b[0];
    return (double(x) + 1.0) * 0x1p-64;
  }

  // Standard normal from one block: cosine branch of Box-Muller on the two
  // 64-bit halves. The radial uniform is taken on (0, 1], bounding the
  // result by sqrt(-2 log 2^{-64}) ~ 9.42.
  double normal(std::uint64_t path, std::uint32_t substep) const {
    const auto b = block(path, substep, DrawSlot::gaussian);
    const std::uint64_t xr = (std::uint64_t(b[1]) << 32) | b[0];
    const std::uint64_t xa = (std::uint64_t(b[3]) << 32) | b[2];
    const double u1 = (double(xr) + 1.0) * 0x1p-64;
    const double u2 = double(xa) * 0x1p-64;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  std::uint32_t key0() const { return key0_; }
  std::uint32_t key1() const { return key1_; }

 private:
  std::uint32_t key0_;
  std::uint32_t key1_;
};

}  // namespace passage
