#include "drcate/rng.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

#include "drcate/error.hpp"

namespace drcate {

namespace {

constexpr std::uint32_t kMultiplier0 = 0xD2511F53u;
constexpr std::uint32_t kMultiplier1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

Philox4x32::Block Philox4x32::generate(Block ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMultiplier0, ctr[0], hi0, lo0);
    mulhilo(kMultiplier1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

RandomStream::RandomStream(std::uint64_t key) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

std::uint64_t RandomStream::next_u64() noexcept {
  if (used_ >= 4) {
    const Philox4x32::Block counter{static_cast<std::uint32_t>(counter_),
                                    static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
    buffer_ = Philox4x32::generate(counter, key_);
    ++counter_;
    used_ = 0;
  }
  const std::uint64_t lo = buffer_[static_cast<std::size_t>(used_)];
  const std::uint64_t hi = buffer_[static_cast<std::size_t>(used_ + 1)];
  used_ += 2;
  return (hi << 32) | lo;
}

double RandomStream::uniform() noexcept {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  return (static_cast<double>(next_u64() >> 11) + 0.5) * kScale;
}

double RandomStream::normal() { return normal_quantile(uniform()); }

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw ArgumentError("normal quantile needs u in (0, 1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

}  // namespace drcate
