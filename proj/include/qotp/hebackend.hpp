#pragma once
#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "qotp/bits.hpp"
#include "qotp/euler.hpp"
#include "qotp/lattice.hpp"
#include "qotp/rng.hpp"
#include "qotp/su2.hpp"

namespace qotp {

// A chained sequence of lattice keypairs for leveled evaluation: slot i's
// secrets are additionally stored bit-encrypted under slot i+1's public key,
// so material can migrate one slot forward. Layout is 3*kbits*levels + 1
// slots: three switches per pad component per circuit level, plus the final
// output key.
struct LatticeKeyChain {
  LweParams p;
  int kbits = 0, levels = 0;
  std::vector<TrapdoorKeypair> keys;

  // links[i]: slot-i secrets under pk_{i+1} — the m secret-combination bits,
  // then the trapdoor bits row-major. Additive form keeps a link small.
  struct Link {
    std::vector<AltCiphertext> sk_bits;    // m entries
    std::vector<AltCiphertext> trap_bits;  // mbar * n * wb entries
  };
  std::vector<Link> links;

  int slots() const { return int(keys.size()); }
};

LatticeKeyChain keychain_gen(const LweParams& p, int kbits, int levels, Rng& rng);

void save_keychain(const std::string& path, const LatticeKeyChain& ch);
LatticeKeyChain load_keychain(const std::string& path);

// Mock twin: slot bookkeeping without key material.
struct MockKeyChain {
  int kbits = 0, levels = 0;
  int nslots = 0;
  int slots() const { return nslots; }
};

inline MockKeyChain keychain_gen_mock(int kbits, int levels) {
  return {kbits, levels, 3 * kbits * levels + 1};
}

// Bit-circuit backend over the lattice schemes. Mirrors MockBackend
// (bits.hpp) operation for operation: the same plaintext folding, the same
// slot discipline, the same depth bookkeeping — so the mock is a faithful
// oracle for anything built on top.
//
// A bit can carry a matrix-form ciphertext (nand-capable), an additive-form
// one (xor_alt-capable), or both; publicly known bits carry neither.
// Ciphertexts are shared_ptr-held so copying bits around word circuits is
// cheap.
struct LatticeBackend {
  struct Bit {
    std::shared_ptr<const MheCiphertext> mhe;
    std::shared_ptr<const AltCiphertext> alt;
    uint32_t depth = 0;
    int32_t slot = -1;  // -1 while publicly known
    int8_t plain = -1;  // 0/1 when publicly known, else -1
  };

  // The chain is immutable and shared freely. Gate evaluation (nand, not_,
  // xor_alt) only reads it and bumps the atomic counters, so threads may
  // drive one backend concurrently on disjoint bits; encrypt draws from the
  // rng and needs external ordering.
  const LatticeKeyChain* chain = nullptr;
  Rng rng;
  std::atomic<uint64_t> nands{0};
  uint64_t refreshes = 0;  // refresh draws from the rng: serial, like encrypt
  uint32_t max_depth = 0;  // 0 = unlimited
  std::atomic<bool> budget_exceeded{false};

  LatticeBackend(const LatticeKeyChain& ch, uint64_t seed)
      : chain(&ch), rng(seed), max_depth(uint32_t(ch.p.eta_c)) {}

  Bit constant(bool v) {
    Bit b;
    b.plain = int8_t(v);
    return b;
  }

  Bit encrypt(bool v, int slot = 0);
  bool decrypt(const Bit& b) const;

  Bit not_(const Bit& b);
  Bit nand(const Bit& a, const Bit& b);

  // Additive-form path: xor with zero nand cost. to_alt attaches the
  // additive form (a column extraction on matrix-form bits); xor_alt sums.
  Bit to_alt(const Bit& b);
  Bit xor_alt(const Bit& a, const Bit& b);

  // Same-slot re-encryption through the chain's secrets: noise drops back to
  // fresh. This is what bounds circuits to constant depth between switches —
  // word arithmetic deeper than the budget must pass through refresh points.
  Bit refresh(const Bit& b);
};

// Move a bit one slot forward along the chain. Publicly known bits pass
// through untouched; encrypted bits come out fresh (depth 0) under the next
// key. Throws std::out_of_range when the chain has no link at the bit's slot.
LatticeBackend::Bit key_switch(LatticeBackend& k, const LatticeKeyChain& ch,
                               const LatticeBackend::Bit& b);

inline MockBackend::Bit key_switch(MockBackend& /*k*/, const MockKeyChain& ch,
                                   const MockBackend::Bit& b) {
  if (b.plain >= 0) return b;
  if (b.slot < 0 || b.slot + 1 >= ch.slots())
    throw std::out_of_range("key_switch: no link at slot " + std::to_string(b.slot));
  MockBackend::Bit r = b;
  r.slot = b.slot + 1;
  r.depth = 0;
  return r;
}

// ---- fraction words (value = raw / 2^width, LSB first) ----

template <class B>
Word<B> enc_frac(B& k, uint64_t raw, int m, int slot = 0) {
  Word<B> w;
  w.bit.reserve(size_t(m));
  for (int j = 0; j < m; ++j) w.bit.push_back(k.encrypt((raw >> j) & 1, slot));
  return w;
}

template <class B>
uint64_t dec_frac(const B& k, const Word<B>& w) {
  uint64_t raw = 0;
  for (int j = 0; j < w.width(); ++j)
    if (k.decrypt(w.bit[size_t(j)])) raw |= uint64_t(1) << j;
  return raw;
}

// (a + b) mod 1: the ripple carry out of the top bit is exactly the integer
// part, so dropping it is the reduction.
template <class B>
Word<B> add_mod1(B& k, const Word<B>& a, const Word<B>& b) {
  if (a.width() != b.width()) throw std::invalid_argument("add_mod1: width mismatch");
  return w_add(k, a, b);
}

// sel ? (1 - a mod 1) : a, i.e. two's-complement negation under the selector:
// xor every bit with sel, then add sel at the low end. Negating zero wraps
// back to zero.
template <class B>
Word<B> negate_mod1(B& k, typename B::Bit sel, const Word<B>& a) {
  return w_cond_neg(k, sel, a);
}

// acc +/- x * mag for a public integer mag, by shift-adds over its set bits.
// Every add passes through a refresh point so the accumulator never carries
// more than one adder's worth of noise.
template <class B>
Word<B> w_add_scaled(B& k, Word<B> acc, const Word<B>& x, uint64_t mag, bool subtract) {
  while (mag) {
    int p = __builtin_ctzll(mag);
    mag &= mag - 1;
    Word<B> sh = w_shl(k, x, p);
    sh.bit.resize(acc.bit.size(), k.constant(false));
    acc = w_refresh(k, subtract ? w_sub(k, acc, sh) : w_add(k, acc, sh));
  }
  return acc;
}

// Right-multiply an encrypted index vector by a public k-bit one. Matches
// quat_mul_fixed bit for bit: exact signed products accumulated at 2k
// fractional bits, then truncated toward zero back to k. Defined for
// products of magnitude at most 1 (always the case for unit-vector
// truncations).
template <class B>
EncQuat<B> eval_quat_mul_encrypted(B& k, const EncQuat<B>& t, const QuatK& rhs) {
  if (t.k != rhs.k) throw std::invalid_argument("quat mul: precision mismatch");
  const int kk = t.k;
  const int W = 2 * kk + 4;

  // operands as two's-complement numerators (k fractional bits); refreshed so
  // each later stage starts from fresh noise
  std::array<Word<B>, 4> tw;
  for (int i = 0; i < 4; ++i) {
    Word<B> mag = w_const(k, 0, W);
    for (int j = 0; j < kk; ++j) mag.bit[size_t(j)] = t.c[size_t(i)].frac[size_t(j)];
    mag.bit[size_t(kk)] = t.c[size_t(i)].unit;
    tw[size_t(i)] = w_refresh(k, w_cond_neg(k, t.c[size_t(i)].sign, mag));
  }

  // component i of the product = sum of tw[ja] * rhs[jb] with these signs
  struct Term {
    int ja, jb;
    bool neg;
  };
  static constexpr Term kTable[4][4] = {
      {{0, 0, false}, {1, 1, true}, {2, 2, true}, {3, 3, true}},
      {{0, 1, false}, {1, 0, false}, {2, 3, false}, {3, 2, true}},
      {{0, 2, false}, {2, 0, false}, {3, 1, false}, {1, 3, true}},
      {{0, 3, false}, {3, 0, false}, {1, 2, false}, {2, 1, true}},
  };

  EncQuat<B> out;
  out.k = kk;
  for (int i = 0; i < 4; ++i) {
    Word<B> acc = w_const(k, 0, W);  // 2k fractional bits
    for (const Term& tm : kTable[i]) {
      int64_t c = rhs.c[size_t(tm.jb)].num;
      if (c == 0) continue;
      bool neg = tm.neg != (c < 0);
      acc = w_add_scaled(k, acc, tw[size_t(tm.ja)], uint64_t(c < 0 ? -c : c), neg);
    }
    // truncate toward zero: split off the sign, shift the magnitude
    auto sign = acc.bit.back();
    Word<B> mag = w_cond_neg(k, sign, acc);
    EncQuatComp<B>& r = out.c[size_t(i)];
    r.sign = sign;
    r.unit = mag.bit[size_t(2 * kk)];
    r.frac.assign(mag.bit.begin() + kk, mag.bit.begin() + 2 * kk);
  }
  return out;
}

}  // namespace qotp
