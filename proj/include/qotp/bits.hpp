#pragma once
#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qotp {

// Bit backends. Every boolean circuit in this project is written once as a
// template over a backend providing nand/not_/constant/encrypt/decrypt, so the
// plaintext, mock-ciphertext, and lattice evaluations of a circuit are the
// same code path by construction.

// Plaintext backend: bits are bytes, nand is counted so tests can assert
// circuit sizes stay sane.
struct PlainBackend {
  using Bit = uint8_t;
  uint64_t nands = 0;

  Bit constant(bool v) { return Bit(v); }
  Bit nand(Bit a, Bit b) {
    ++nands;
    return Bit(!(a && b));
  }
  Bit not_(Bit a) { return Bit(!a); }
  Bit encrypt(bool v, int /*slot*/ = 0) { return Bit(v); }
  bool decrypt(Bit b) const { return b != 0; }
  // additive-form ops; on richer backends these are nand-free
  Bit to_alt(Bit a) { return a; }
  Bit xor_alt(Bit a, Bit b) { return Bit(a != b); }
  // re-encryption point; value-preserving on every backend
  Bit refresh(Bit a) { return a; }
};

// Mock ciphertext backend: carries the plaintext bit plus the bookkeeping a
// lattice evaluation would do — multiplicative depth, key slot, and public
// constness. Gate shortcuts mirror the lattice ones: nand against a known 0
// yields a known 1, nand against a known 1 is a free complement, and not_
// never grows depth.
struct MockBackend {
  struct Bit {
    uint8_t v = 0;
    uint32_t depth = 0;
    int32_t slot = -1;  // -1 while publicly known
    int8_t plain = -1;  // 0/1 when publicly known, else -1
  };
  uint64_t nands = 0;
  uint64_t refreshes = 0;
  uint32_t max_depth = 0;      // 0 = unlimited
  bool budget_exceeded = false;  // sticky flag, never throws mid-circuit

  Bit constant(bool v) { return Bit{uint8_t(v), 0, -1, int8_t(v)}; }

  Bit encrypt(bool v, int slot = 0) { return Bit{uint8_t(v), 0, slot, -1}; }

  bool decrypt(const Bit& b) const { return b.v != 0; }

  Bit not_(const Bit& b) {
    Bit r = b;
    r.v = uint8_t(!b.v);
    if (b.plain >= 0) r.plain = int8_t(1 - b.plain);
    return r;
  }

  Bit nand(const Bit& a, const Bit& b) {
    if (a.plain == 0 || b.plain == 0) return constant(true);
    if (a.plain == 1) return not_(b);
    if (b.plain == 1) return not_(a);
    if (a.slot != b.slot) throw std::logic_error("mock nand: operands under different keys");
    ++nands;
    Bit r;
    r.v = uint8_t(!(a.v && b.v));
    r.depth = (a.depth > b.depth ? a.depth : b.depth) + 1;
    r.slot = a.slot;
    r.plain = -1;
    if (max_depth && r.depth > max_depth) budget_exceeded = true;
    return r;
  }

  // Additive-form XOR: free of nand on backends with an additive ciphertext
  // form, so it does not touch the nand counter. Depth still grows (noise adds).
  Bit to_alt(const Bit& b) { return b; }
  Bit xor_alt(const Bit& a, const Bit& b) {
    if (a.plain >= 0 && b.plain >= 0) return constant((a.plain ^ b.plain) != 0);
    if (a.plain == 0) return b;
    if (a.plain == 1) return not_(b);
    if (b.plain == 0) return a;
    if (b.plain == 1) return not_(a);
    if (a.slot != b.slot) throw std::logic_error("mock xor_alt: operands under different keys");
    Bit r;
    r.v = uint8_t(a.v ^ b.v);
    r.depth = (a.depth > b.depth ? a.depth : b.depth) + 1;
    r.slot = a.slot;
    r.plain = -1;
    if (max_depth && r.depth > max_depth) budget_exceeded = true;
    return r;
  }

  // Same-slot re-encryption: noise (here: depth) drops back to fresh.
  Bit refresh(const Bit& b) {
    if (b.plain >= 0) return b;
    ++refreshes;
    Bit r = b;
    r.depth = 0;
    return r;
  }
};

// Derived gates.
template <class B>
typename B::Bit g_and(B& k, typename B::Bit a, typename B::Bit b) {
  return k.not_(k.nand(a, b));
}
template <class B>
typename B::Bit g_or(B& k, typename B::Bit a, typename B::Bit b) {
  return k.nand(k.not_(a), k.not_(b));
}
template <class B>
typename B::Bit g_xor(B& k, typename B::Bit a, typename B::Bit b) {
  auto n = k.nand(a, b);
  return k.nand(k.nand(a, n), k.nand(b, n));
}
// s ? a1 : a0
template <class B>
typename B::Bit g_mux(B& k, typename B::Bit s, typename B::Bit a1, typename B::Bit a0) {
  return k.nand(k.nand(a1, s), k.nand(a0, k.not_(s)));
}

// Little-endian two's-complement word of backend bits.
template <class B>
struct Word {
  std::vector<typename B::Bit> bit;
  int width() const { return int(bit.size()); }
};

template <class B>
Word<B> w_const(B& k, int64_t raw, int W) {
  Word<B> w;
  w.bit.reserve(size_t(W));
  for (int i = 0; i < W; ++i) w.bit.push_back(k.constant((raw >> i) & 1));
  return w;
}

template <class B>
Word<B> w_trunc(const Word<B>& a, int W) {
  Word<B> r;
  r.bit.assign(a.bit.begin(), a.bit.begin() + W);
  return r;
}

template <class B>
Word<B> w_sext(const Word<B>& a, int W) {
  Word<B> r = a;
  while (r.width() < W) r.bit.push_back(a.bit.back());
  return r;
}

template <class B>
Word<B> w_zext(B& k, const Word<B>& a, int W) {
  Word<B> r = a;
  while (r.width() < W) r.bit.push_back(k.constant(false));
  return r;
}

// Shifts are rewiring, no gates.
template <class B>
Word<B> w_shl(B& k, const Word<B>& a, int s) {
  Word<B> r;
  for (int i = 0; i < s; ++i) r.bit.push_back(k.constant(false));
  for (int i = 0; i + s < a.width(); ++i) r.bit.push_back(a.bit[size_t(i)]);
  return r;
}

template <class B>
Word<B> w_ashr(const Word<B>& a, int s) {
  Word<B> r;
  for (int i = s; i < a.width(); ++i) r.bit.push_back(a.bit[size_t(i)]);
  while (r.width() < a.width()) r.bit.push_back(a.bit.back());
  return r;
}

template <class B>
Word<B> w_not(B& k, const Word<B>& a) {
  Word<B> r;
  for (auto& b : a.bit) r.bit.push_back(k.not_(b));
  return r;
}

template <class B>
Word<B> w_xor_bit(B& k, const Word<B>& a, typename B::Bit s) {
  Word<B> r;
  for (auto& b : a.bit) r.bit.push_back(g_xor(k, b, s));
  return r;
}

template <class B>
Word<B> w_and_bit(B& k, const Word<B>& a, typename B::Bit s) {
  Word<B> r;
  for (auto& b : a.bit) r.bit.push_back(g_and(k, b, s));
  return r;
}

// Ripple adder; result has the width of a (b must match). Carry out dropped.
template <class B>
Word<B> w_add(B& k, const Word<B>& a, const Word<B>& b) {
  Word<B> r;
  auto c = k.constant(false);
  for (int i = 0; i < a.width(); ++i) {
    auto t = g_xor(k, a.bit[size_t(i)], b.bit[size_t(i)]);
    r.bit.push_back(g_xor(k, t, c));
    c = k.nand(k.nand(a.bit[size_t(i)], b.bit[size_t(i)]), k.nand(t, c));
  }
  return r;
}

// a + single-bit s (ripple of a half adder chain).
template <class B>
Word<B> w_add_bit(B& k, const Word<B>& a, typename B::Bit s) {
  Word<B> r;
  auto c = s;
  for (int i = 0; i < a.width(); ++i) {
    r.bit.push_back(g_xor(k, a.bit[size_t(i)], c));
    c = g_and(k, a.bit[size_t(i)], c);
  }
  return r;
}

template <class B>
Word<B> w_neg(B& k, const Word<B>& a) {
  return w_add_bit(k, w_not(k, a), k.constant(true));
}

template <class B>
Word<B> w_sub(B& k, const Word<B>& a, const Word<B>& b) {
  // a + ~b + 1 in one ripple
  Word<B> r;
  auto c = k.constant(true);
  for (int i = 0; i < a.width(); ++i) {
    auto nb = k.not_(b.bit[size_t(i)]);
    auto t = g_xor(k, a.bit[size_t(i)], nb);
    r.bit.push_back(g_xor(k, t, c));
    c = k.nand(k.nand(a.bit[size_t(i)], nb), k.nand(t, c));
  }
  return r;
}

template <class B>
Word<B> w_mux(B& k, typename B::Bit s, const Word<B>& a1, const Word<B>& a0) {
  Word<B> r;
  for (int i = 0; i < a1.width(); ++i)
    r.bit.push_back(g_mux(k, s, a1.bit[size_t(i)], a0.bit[size_t(i)]));
  return r;
}

// two's-complement conditional negation: s ? -a : a
template <class B>
Word<B> w_cond_neg(B& k, typename B::Bit s, const Word<B>& a) {
  return w_add_bit(k, w_xor_bit(k, a, s), s);
}

template <class B>
Word<B> w_refresh(B& k, const Word<B>& a) {
  Word<B> r;
  r.bit.reserve(a.bit.size());
  for (auto& b : a.bit) r.bit.push_back(k.refresh(b));
  return r;
}

// Unsigned schoolbook product, low Wout bits.
template <class B>
Word<B> w_mul_u(B& k, const Word<B>& a, const Word<B>& b, int Wout) {
  Word<B> acc = w_const(k, 0, Wout);
  for (int j = 0; j < b.width() && j < Wout; ++j) {
    // row = (a << j) & b_j, added into acc over the window it touches
    int hi = std::min(Wout, j + a.width());
    Word<B> window;
    window.bit.assign(acc.bit.begin() + j, acc.bit.begin() + hi);
    Word<B> row;
    for (int i = 0; i + j < hi; ++i) row.bit.push_back(g_and(k, a.bit[size_t(i)], b.bit[size_t(j)]));
    Word<B> summed = w_add(k, window, row);
    for (int i = j; i < hi; ++i) acc.bit[size_t(i)] = summed.bit[size_t(i - j)];
  }
  return acc;
}

// Signed product via magnitudes (conditional negations around an unsigned
// multiply), low Wout bits. Exact when the true product fits Wout bits.
template <class B>
Word<B> w_mul_s(B& k, const Word<B>& a, const Word<B>& b, int Wout) {
  auto sa = a.bit.back(), sb = b.bit.back();
  Word<B> ma = w_cond_neg(k, sa, a), mb = w_cond_neg(k, sb, b);
  Word<B> p = w_mul_u(k, ma, mb, Wout);
  return w_cond_neg(k, g_xor(k, sa, sb), p);
}

// signed a < b (valid when a-b does not overflow, which our headroom ensures)
template <class B>
typename B::Bit w_lt_s(B& k, const Word<B>& a, const Word<B>& b) {
  return w_sub(k, a, b).bit.back();
}

template <class B>
typename B::Bit w_is_zero(B& k, const Word<B>& a) {
  auto any = a.bit[0];
  for (int i = 1; i < a.width(); ++i) any = g_or(k, any, a.bit[size_t(i)]);
  return k.not_(any);
}

template <class B>
int64_t w_decrypt(const B& k, const Word<B>& a) {
  uint64_t v = 0;
  for (int i = 0; i < a.width(); ++i)
    if (k.decrypt(a.bit[size_t(i)])) v |= uint64_t(1) << i;
  // sign extend
  if (a.width() < 64 && (v >> (a.width() - 1)) & 1) v |= ~uint64_t(0) << a.width();
  return int64_t(v);
}

}  // namespace qotp
