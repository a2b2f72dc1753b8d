#pragma once

#include <array>
#include <cstdint>

namespace graphon_ising {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// A pure function of (counter, key): every edge of a sampled graph gets its
/// own stream keyed by the run seed, so results do not depend on the order
/// in which edges are generated.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

  static constexpr Key key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }

  /// Uniform double in [0, 1) built from the first 53 random bits of the block.
  static constexpr double to_unit(const Counter& block) {
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(block[0]) << 32 | block[1]) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  /// Uniform double for the stream (seed, a, b).
  static constexpr double uniform(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
    return to_unit(generate({a, b, 0u, 0u}, key_from_seed(seed)));
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

}  // namespace graphon_ising
