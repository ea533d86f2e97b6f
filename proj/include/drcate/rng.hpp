#pragma once

#include <array>
#include <cstdint>

namespace drcate {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// A block is a pure function of (key, counter), so every replication can own
// an independent stream keyed by its seed.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block counter, Key key) noexcept;
};

// Sequential stream over one Philox key: 64-bit words, uniforms and normals.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) noexcept;

  std::uint64_t next_u64() noexcept;

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Standard normal by inverse CDF of one uniform.
  double normal();

 private:
  Philox4x32::Key key_;
  std::uint64_t counter_ = 0;
  Philox4x32::Block buffer_{};
  int used_ = 4;
};

// Stream for replication r of a run seeded with `seed`: key = seed XOR r.
inline RandomStream replication_stream(std::uint64_t seed, std::uint64_t r) noexcept {
  return RandomStream(seed ^ r);
}

// Standard normal quantile.
double normal_quantile(double u);

}  // namespace drcate
