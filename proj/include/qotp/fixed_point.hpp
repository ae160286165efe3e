#pragma once
#include <cmath>
#include <complex>
#include <cstdint>

#include "qotp/bits.hpp"

namespace qotp {

// Plain fixed-point value: raw / 2^f. The arithmetic the pipeline performs on
// these is the bit circuit below evaluated on the plaintext backend, so the
// plaintext and homomorphic paths cannot drift apart.
struct FixedPointNumber {
  int64_t raw = 0;
  int f = 24;

  static FixedPointNumber from_double(double v, int f = 24) {
    return {std::llround(std::ldexp(v, f)), f};
  }
  double to_double() const { return std::ldexp(double(raw), -f); }
};

// Fixed-point context over a bit backend: two's-complement words with f
// fractional bits and 4 bits of headroom (values in [-8, 8), data in [-2, 2]).
template <class B>
struct FpCtx {
  B* k;
  int f;
  int W;  // f + 4

  FpCtx(B& backend, int frac_bits) : k(&backend), f(frac_bits), W(frac_bits + 4) {}

  Word<B> constant(double v) const { return w_const(*k, std::llround(std::ldexp(v, f)), W); }
  Word<B> zero() const { return w_const(*k, 0, W); }

  Word<B> add(const Word<B>& a, const Word<B>& b) const { return w_add(*k, a, b); }
  Word<B> sub(const Word<B>& a, const Word<B>& b) const { return w_sub(*k, a, b); }
  Word<B> neg(const Word<B>& a) const { return w_neg(*k, a); }
  Word<B> half(const Word<B>& a) const { return w_ashr(a, 1); }      // floor halving
  Word<B> quarter(const Word<B>& a) const { return w_ashr(a, 2); }

  // Product rounded half-up at f fractional bits.
  Word<B> mul(const Word<B>& a, const Word<B>& b) const {
    Word<B> p = w_mul_s(*k, w_sext(a, 2 * W), w_sext(b, 2 * W), 2 * W);
    Word<B> r = w_add(*k, p, w_const(*k, int64_t(1) << (f - 1), 2 * W));
    return w_trunc(w_ashr(r, f), W);
  }

  // Exact product: 2f fractional bits, width 2W.
  Word<B> mul_exact(const Word<B>& a, const Word<B>& b) const {
    return w_mul_s(*k, w_sext(a, 2 * W), w_sext(b, 2 * W), 2 * W);
  }

  typename B::Bit lt_const(const Word<B>& a, double c) const {
    return w_lt_s(*k, a, constant(c));
  }

  int64_t decrypt_raw(const Word<B>& a) const { return w_decrypt(*k, a); }
  double decrypt(const Word<B>& a) const { return std::ldexp(double(decrypt_raw(a)), -f); }
};

template <class B>
struct CWord {  // complex pair
  Word<B> re, im;
};

// 1/x by the coupled iteration a <- a(1+e), e <- e^2 starting from a0 = 1,
// e0 = 1-x; runs d+1 steps so the error term is (1/x)(1-x)^(2^(d+1)).
// No domain checks here — garbage wraps identically on every backend and is
// muxed away by callers; the public wrapper validates.
template <class B>
Word<B> inv_circuit(FpCtx<B>& c, const Word<B>& x, int d) {
  Word<B> one = c.constant(1.0);
  Word<B> a = one;
  Word<B> e = c.sub(one, x);
  for (int i = 0; i <= d; ++i) {
    a = c.mul(a, c.add(one, e));
    e = c.mul(e, e);
  }
  return a;
}

// sqrt(x) for x in [0,1]: a <- a(1 - b/2), b <- b^2 (b-3)/4 from a0 = x,
// b0 = x-1; invariant a^2 = x(1+b), so |a - sqrt(x)| <= sqrt(x)(1-x/4)^(2^(d+1)).
template <class B>
Word<B> sqrt_circuit(FpCtx<B>& c, const Word<B>& x, int d) {
  Word<B> one = c.constant(1.0);
  Word<B> a = x;
  Word<B> b = c.sub(x, one);
  for (int i = 0; i < d; ++i) {
    a = c.mul(a, c.sub(one, c.half(b)));
    Word<B> b2 = c.mul(b, b);
    b = c.quarter(c.mul(b2, c.sub(b, c.constant(3.0))));
  }
  return a;
}

// sum_{n=1..K} (-1)^(n-1) u^n / n  (principal log of 1+u), Horner form
// u*(c1 - u*(c2 - u*(c3 - ...))). |u| <= 0.9 keeps every intermediate < 2.
template <class B>
CWord<B> horner_ln(FpCtx<B>& c, const CWord<B>& u, int K) {
  Word<B> ar = c.constant(1.0 / K), ai = c.zero();
  for (int n = K - 1; n >= 1; --n) {
    // acc = 1/n - u*acc
    Word<B> pr = c.sub(c.mul(u.re, ar), c.mul(u.im, ai));
    Word<B> pi = c.add(c.mul(u.re, ai), c.mul(u.im, ar));
    ar = c.sub(c.constant(1.0 / n), pr);
    ai = c.neg(pi);
  }
  Word<B> rr = c.sub(c.mul(u.re, ar), c.mul(u.im, ai));
  Word<B> ri = c.add(c.mul(u.re, ai), c.mul(u.im, ar));
  return {rr, ri};
}

// Arg(z)/pi in [-1,1) for z near the unit circle, evaluated as a masked sum
// over the four discs centred at e^(i pi (2s-1)/4): the quadrant selectors
// zero out every u_s except the disc the sign bits pick, one Horner evaluates
// the shared series, and the disc offsets theta_s/pi are mux-summed back in.
// Result word wraps mod 2 (f+1 data bits, sign-extended to width W).
template <class B>
Word<B> arg_circuit(FpCtx<B>& c, const CWord<B>& z, int K) {
  B& k = *c.k;
  auto da = z.re.bit.back();  // sign of Re
  auto db = z.im.bit.back();  // sign of Im
  typename B::Bit sel[4] = {
      g_and(k, k.not_(da), k.not_(db)),  // disc 1: ++
      g_and(k, da, k.not_(db)),          // disc 2: -+
      g_and(k, da, db),                  // disc 3: --
      g_and(k, k.not_(da), db),          // disc 4: +-
  };
  const double r2 = std::sqrt(0.5);
  const double cr[4] = {r2, -r2, -r2, r2};
  const double ci[4] = {r2, r2, -r2, -r2};
  const double toff[4] = {0.25, 0.75, -0.75, -0.25};  // theta_s / pi

  CWord<B> u{c.zero(), c.zero()};
  Word<B> off = c.zero();
  for (int s = 0; s < 4; ++s) {
    // u_s = (z - c_s) * conj(c_s)
    Word<B> dr = c.sub(z.re, c.constant(cr[s]));
    Word<B> di = c.sub(z.im, c.constant(ci[s]));
    Word<B> ur = c.add(c.mul(dr, c.constant(cr[s])), c.mul(di, c.constant(ci[s])));
    Word<B> ui = c.sub(c.mul(di, c.constant(cr[s])), c.mul(dr, c.constant(ci[s])));
    u.re = c.add(u.re, w_and_bit(k, ur, sel[s]));
    u.im = c.add(u.im, w_and_bit(k, ui, sel[s]));
    off = c.add(off, w_and_bit(k, c.constant(toff[s]), sel[s]));
  }
  CWord<B> h = horner_ln(c, u, K);
  Word<B> d = c.add(off, c.mul(h.im, c.constant(1.0 / 3.14159265358979323846)));
  // wrap mod 2: keep f+1 bits, sign-extend back to W
  return w_sext(w_trunc(d, c.f + 1), c.W);
}

// Public plain wrappers (validated; evaluate the circuits on PlainBackend).
FixedPointNumber fp_inverse(FixedPointNumber x, int d);
FixedPointNumber fp_sqrt(FixedPointNumber x, int d);
// P(z) on disc s in {1..4}; |z - center| must be < 0.9.
std::complex<double> taylor_ln_eval(std::complex<double> z, int K, int s);
// d with [d - Arg(a+bi)/pi] small mod 2; (a,b) must lie in its quadrant's disc.
FixedPointNumber arg_over_pi_mod2(FixedPointNumber a, FixedPointNumber b, int K);

}  // namespace qotp
