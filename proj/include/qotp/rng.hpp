#pragma once
#include <cmath>
#include <cstdint>
#include <string_view>

namespace qotp {

// Deterministic counter-based generator: out_i = mix(key + GOLDEN*i).
// Streams are addressable — fork(label) derives an independent child stream
// from the key and the label only, so forked results never depend on how much
// the parent has been consumed. Same label twice = same stream (callers pick
// distinct labels; that is what makes trial-parallel runs schedule-independent).
class Rng {
public:
  explicit Rng(uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc908ull)) {}

  uint64_t next_u64() { return mix(key_ + GOLDEN * ++ctr_); }

  int next_bit() {
    if (nbits_ == 0) { bitbuf_ = next_u64(); nbits_ = 64; }
    int b = int(bitbuf_ & 1);
    bitbuf_ >>= 1;
    --nbits_;
    return b;
  }

  // Uniform in [0, n). Rejection keeps it exactly unbiased.
  uint64_t below(uint64_t n) {
    uint64_t lim = (-n) % n;  // 2^64 mod n
    for (;;) {
      uint64_t r = next_u64();
      if (r >= lim) return (r - lim) % n;
    }
  }

  // Uniform in [0,1) with 53 random bits.
  double unit_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal (Box-Muller; one value per call, no caching so the
  // stream position stays a pure function of call count).
  double normal() {
    double u1, u2;
    do { u1 = unit_double(); } while (u1 == 0.0);
    u2 = unit_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  Rng fork(std::string_view label) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(fnv1a(label) + GOLDEN));
    child.ctr_ = 0;
    return child;
  }

  Rng fork(uint64_t index) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(GOLDEN * (index + 1) + 0x452821e638d01377ull));
    child.ctr_ = 0;
    return child;
  }

private:
  static constexpr uint64_t GOLDEN = 0x9e3779b97f4a7c15ull;

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) { h ^= c; h *= 1099511628211ull; }
    return h;
  }

  uint64_t key_ = 0;
  uint64_t ctr_ = 0;
  uint64_t bitbuf_ = 0;
  int nbits_ = 0;
};

}  // namespace qotp
