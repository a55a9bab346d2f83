#pragma once

// Counter-based random streams (Philox4x32-10). A stream is addressed by
// (seed, stream index); its output depends only on that pair and its own
// counter, so parallel jobs can draw from disjoint streams in any schedule
// and still produce identical results.

#include <array>
#include <cmath>
#include <cstdint>

namespace nngpcert {

namespace detail {

inline void philox_round(std::array<uint32_t, 4>& ctr, const std::array<uint32_t, 2>& key) {
  constexpr uint64_t kMul0 = 0xD2511F53ull;
  constexpr uint64_t kMul1 = 0xCD9E8D57ull;
  const uint64_t p0 = kMul0 * ctr[0];
  const uint64_t p1 = kMul1 * ctr[2];
  const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
  const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline std::array<uint32_t, 4> philox10(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
  constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr uint32_t kWeyl1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    philox_round(ctr, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace detail

// Addressable standard normal: a pure function of (seed, stream, index).
// Entries drawn this way are shared between tensors of different shapes that
// agree on the index map, which couples networks of different widths.
inline double indexed_normal(uint64_t seed, uint64_t stream, uint64_t index) {
  const std::array<uint32_t, 4> block =
      detail::philox10({static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32),
                        static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)},
                       {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)});
  const uint64_t u0 = (static_cast<uint64_t>(block[1]) << 32) | block[0];
  const uint64_t u1 = (static_cast<uint64_t>(block[3]) << 32) | block[2];
  const double a = (static_cast<double>(u0 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double b = static_cast<double>(u1 >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(a)) *
         std::cos(6.283185307179586476925286766559 * b);
}

class RngStream {
 public:
  explicit RngStream(uint64_t seed, uint64_t stream = 0)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        base_{static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)} {}

  uint64_t next_u64() {
    if (word_ >= 4) refill();
    const uint64_t lo = buf_[word_];
    const uint64_t hi = buf_[word_ + 1];
    word_ += 2;
    return (hi << 32) | lo;
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  // rate-1 exponential
  double exponential() { return -std::log(uniform_pos()); }

 private:
  void refill() {
    buf_ = detail::philox10({static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
                             base_[0], base_[1]},
                            key_);
    ++block_;
    word_ = 0;
  }

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 2> base_;  // stream id occupies counter words 2..3
  uint64_t block_ = 0;            // counter words 0..1
  std::array<uint32_t, 4> buf_{};
  int word_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nngpcert
