#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace polycascade {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The output is a
// pure function of (key, counter), so any stream element can be addressed
// directly without sequential state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

  static constexpr Key key_from(std::uint64_t seed) noexcept {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

// Two 64-bit words from one Philox block.
struct RandomPair {
  std::uint64_t first;
  std::uint64_t second;
};

inline RandomPair philox_pair(std::uint64_t seed, const Philox4x32::Counter& ctr) noexcept {
  const auto out = Philox4x32::apply(ctr, Philox4x32::key_from(seed));
  return {(static_cast<std::uint64_t>(out[0]) << 32) | out[1],
          (static_cast<std::uint64_t>(out[2]) << 32) | out[3]};
}

// Uniform in (0, 1]: never returns 0, so the result is safe under log().
inline double uniform_open_closed(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Uniform in [0, 1).
inline double uniform_closed_open(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// FNV-1a, used to turn job descriptors into stream tags.
constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Child seed for (tag, index) under a parent seed; distinct (tag, index) pairs
// give statistically independent child streams.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag, std::uint64_t index = 0) noexcept {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                                static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32) ^ 0x5eedu};
  return philox_pair(parent, ctr).first;
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view job, std::uint64_t index = 0) noexcept {
  return derive_seed(parent, fnv1a(job), index);
}

}  // namespace polycascade
