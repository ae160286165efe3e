#pragma once
#include <array>
#include <cstdint>
#include <utility>

#include "qotp/fixed_point.hpp"
#include "qotp/su2.hpp"

namespace qotp {

// Euler triple as m-bit binary fractions: alpha, gamma in [0,1), beta in
// [0, 1/2] (canonical form). Stored as numerators over 2^m.
struct EulerAngles {
  uint32_t a = 0, b = 0, g = 0;
  int m = 16;
  double alpha() const { return std::ldexp(double(a), -m); }
  double beta() const { return std::ldexp(double(b), -m); }
  double gamma() const { return std::ldexp(double(g), -m); }
  friend bool operator==(const EulerAngles&, const EulerAngles&) = default;
};

// Unquantized triple for the reference conversion.
struct EulerAnglesD {
  double alpha = 0, beta = 0, gamma = 0;
};

// R_alpha * T_beta * R_gamma.
Mat2 euler_to_matrix(const EulerAnglesD& e);
Mat2 euler_to_matrix(const EulerAngles& e);

// Reference conversion. Returns (angles, phase) with
//   euler_to_matrix(angles) = phase * quat_to_matrix(t).
// Degenerate inputs (sin or cos of pi*beta below 2^-20) fold the whole
// rotation into one angle: gamma = 0 when sin vanishes, alpha = 0 when cos
// does.
std::pair<EulerAnglesD, cplx> quat_to_euler_exact(const UnitQuat4& t);

// --- bit-level pipeline -----------------------------------------------------

template <class B>
struct EncQuatComp {
  typename B::Bit sign, unit;
  std::vector<typename B::Bit> frac;  // LSB first, k bits
};
template <class B>
struct EncQuat {
  std::array<EncQuatComp<B>, 4> c;
  int k = 1;
};
template <class B>
struct EncEuler {
  std::vector<typename B::Bit> a, b, g;  // LSB-first numerators over 2^m
  int m = 16;
};

template <class B>
EncQuat<B> encrypt_quat(B& k, const QuatK& q, int slot = 0) {
  EncQuat<B> e;
  e.k = q.k;
  for (int i = 0; i < 4; ++i) {
    int64_t mag = q.c[size_t(i)].num < 0 ? -q.c[size_t(i)].num : q.c[size_t(i)].num;
    e.c[size_t(i)].sign = k.encrypt(q.c[size_t(i)].num < 0, slot);
    e.c[size_t(i)].unit = k.encrypt((mag >> q.k) & 1, slot);
    for (int j = 0; j < q.k; ++j) e.c[size_t(i)].frac.push_back(k.encrypt((mag >> j) & 1, slot));
  }
  return e;
}

template <class B>
QuatK decrypt_quat(const B& k, const EncQuat<B>& e) {
  QuatK q;
  q.k = e.k;
  for (int i = 0; i < 4; ++i) {
    int64_t mag = k.decrypt(e.c[size_t(i)].unit) ? (int64_t(1) << e.k) : 0;
    for (int j = 0; j < e.k; ++j)
      if (k.decrypt(e.c[size_t(i)].frac[size_t(j)])) mag |= int64_t(1) << j;
    q.c[size_t(i)] = {k.decrypt(e.c[size_t(i)].sign) ? -mag : mag, e.k};
  }
  return q;
}

template <class B>
EulerAngles decrypt_euler(const B& k, const EncEuler<B>& e) {
  EulerAngles r;
  r.m = e.m;
  auto read = [&](const std::vector<typename B::Bit>& w) {
    uint32_t v = 0;
    for (size_t j = 0; j < w.size(); ++j)
      if (k.decrypt(w[j])) v |= uint32_t(1) << j;
    return v;
  };
  r.a = read(e.a);
  r.b = read(e.b);
  r.g = read(e.g);
  return r;
}

// One shared fixed-point circuit computes approximate Euler angles from a
// k-bit index vector: squared norms, iterative square roots, phasor
// numerators kept exact at 2f bits, a doubling normalizer, the four-disc Arg
// kernel, and degenerate-branch muxing. f = k + 8 guard bits; all three
// output angles are rounded to nearest at m_out bits (mod 1).
template <class B>
EncEuler<B> he_euler_from_quat(B& k, const EncQuat<B>& t, int degree, int m_out) {
  using Bit = typename B::Bit;
  const int kk = t.k, f = kk + 8;
  FpCtx<B> c(k, f);
  const int W2 = 2 * f + 4;

  // components as two's-complement words
  Word<B> tw[4];
  for (int i = 0; i < 4; ++i) {
    Word<B> mag = c.zero();
    for (int j = 0; j < kk; ++j) mag.bit[size_t(f - kk + j)] = t.c[size_t(i)].frac[size_t(j)];
    mag.bit[size_t(f)] = t.c[size_t(i)].unit;
    tw[i] = w_cond_neg(k, t.c[size_t(i)].sign, mag);
  }

  // exact product at 2f fractional bits, width W2
  auto xmul = [&](const Word<B>& a, const Word<B>& b) { return w_trunc(c.mul_exact(a, b), W2); };
  // round W2-word (2f frac) to the working width (f frac)
  auto round_f = [&](const Word<B>& a) {
    Word<B> r = w_add(k, a, w_const(k, int64_t(1) << (f - 1), W2));
    return w_trunc(w_ashr(r, f), c.W);
  };

  Word<B> x = c.add(c.mul(tw[0], tw[0]), c.mul(tw[2], tw[2]));
  Word<B> y = c.add(c.mul(tw[1], tw[1]), c.mul(tw[3], tw[3]));
  Word<B> cosw = sqrt_circuit(c, x, 32);
  Word<B> sinw = sqrt_circuit(c, y, 32);
  const double thr = 0x1.0p-20;
  Bit deg_cos = c.lt_const(cosw, thr);
  Bit deg_sin = c.lt_const(sinw, thr);

  Word<B> d_beta = arg_circuit(c, {cosw, sinw}, degree);

  // phasor numerators, exact
  Word<B> t12 = xmul(tw[0], tw[1]), t13 = xmul(tw[0], tw[2]), t14 = xmul(tw[0], tw[3]);
  Word<B> t23 = xmul(tw[1], tw[2]), t24 = xmul(tw[1], tw[3]), t34 = xmul(tw[2], tw[3]);
  Word<B> t11 = xmul(tw[0], tw[0]), t22 = xmul(tw[1], tw[1]);
  Word<B> t33 = xmul(tw[2], tw[2]), t44 = xmul(tw[3], tw[3]);

  FpCtx<B> c2(k, 2 * f);  // width W2, used by the normalizer's compares
  auto w2sub = [&](const Word<B>& a, const Word<B>& b) { return w_sub(k, a, b); };
  auto w2add = [&](const Word<B>& a, const Word<B>& b) { return w_add(k, a, b); };

  // bring |z| into [1/4, ~1] by doublings (exact shifts at 2f), then one more
  // square-tested doubling at f, then divide by sqrt of the squared norm
  auto normalize = [&](Word<B> zr, Word<B> zi) -> CWord<B> {
    Word<B> qc = c2.constant(0.25), nqc = c2.constant(-0.25);
    for (int it = 0; it < f + 2; ++it) {
      Bit sr = g_and(k, w_lt_s(k, zr, qc), w_lt_s(k, nqc, zr));
      Bit si = g_and(k, w_lt_s(k, zi, qc), w_lt_s(k, nqc, zi));
      Bit both = g_and(k, sr, si);
      zr = w_mux(k, both, w_shl(k, zr, 1), zr);
      zi = w_mux(k, both, w_shl(k, zi, 1), zi);
    }
    Word<B> rr = round_f(zr), ri = round_f(zi);
    Word<B> s = c.add(c.mul(rr, rr), c.mul(ri, ri));
    Bit small = k.not_(w_lt_s(k, c.constant(0.25), s));  // s <= 1/4
    rr = w_mux(k, small, w_shl(k, rr, 1), rr);
    ri = w_mux(k, small, w_shl(k, ri, 1), ri);
    s = w_mux(k, small, w_shl(k, s, 2), s);
    Word<B> root = sqrt_circuit(c, s, 32);
    Word<B> iv = inv_circuit(c, root, 16);
    return {c.mul(rr, iv), c.mul(ri, iv)};
  };

  // alpha phasor: (t2 t3 - t1 t4) + (t1 t2 + t3 t4) i
  CWord<B> za = normalize(w2sub(t23, t14), w2add(t12, t34));
  // gamma phasor: -(t1 t4 + t2 t3) + (t3 t4 - t1 t2) i
  CWord<B> zg = normalize(w_neg(k, w2add(t14, t23)), w2sub(t34, t12));
  Word<B> d_alpha = arg_circuit(c, za, degree);
  Word<B> d_gamma = arg_circuit(c, zg, degree);

  // degenerate phasors (unit-modulus in their branch; masked to 1 otherwise)
  Word<B> onef = c.constant(1.0);
  Word<B> ws_re = w_mux(k, deg_sin, round_f(w2sub(t11, t33)), onef);
  Word<B> ws_im = w_and_bit(k, round_f(w_neg(k, w_shl(k, t13, 1))), deg_sin);
  Word<B> wc_re = w_mux(k, deg_cos, round_f(w2sub(t22, t44)), onef);
  Word<B> wc_im = w_and_bit(k, round_f(w_neg(k, w_shl(k, t24, 1))), deg_cos);
  Word<B> d_sdeg = arg_circuit(c, {ws_re, ws_im}, degree);
  Word<B> d_cdeg = arg_circuit(c, {wc_re, wc_im}, degree);

  // d -> (d/2 mod 1) as an unsigned f+1-bit fraction: reinterpret low bits
  auto half_mod1 = [&](const Word<B>& d) { return w_trunc(d, f + 1); };
  Word<B> zero1 = w_const(k, 0, f + 1);

  Word<B> a_nd = half_mod1(d_alpha), g_nd = half_mod1(d_gamma);
  Word<B> a_sd = half_mod1(d_sdeg);
  Word<B> g_cd = half_mod1(d_cdeg);
  g_cd.bit[size_t(f)] = k.not_(g_cd.bit[size_t(f)]);  // + 1/2 mod 1

  Word<B> aw = w_mux(k, deg_cos, zero1, w_mux(k, deg_sin, a_sd, a_nd));
  Word<B> gw = w_mux(k, deg_cos, g_cd, w_mux(k, deg_sin, zero1, g_nd));
  // beta: not halved, so shift up one bit to match the f+1 convention, and
  // clamp tiny negatives to 0; the value already sits in [0, 1/2]
  Word<B> bw = w_and_bit(k, w_trunc(w_shl(k, d_beta, 1), f + 1), k.not_(d_beta.bit.back()));

  // round-to-nearest at m_out bits, carry wraps mod 1
  auto quant = [&](const Word<B>& u) {
    Word<B> r = w_add(k, u, w_const(k, int64_t(1) << (f - m_out), f + 1));
    std::vector<Bit> out;
    for (int j = 0; j < m_out; ++j) out.push_back(r.bit[size_t(f + 1 - m_out + j)]);
    return out;
  };

  EncEuler<B> out;
  out.m = m_out;
  out.a = quant(aw);
  out.b = quant(bw);
  out.g = quant(gw);
  // beta can only overshoot 1/2 by rounding; clamp back to exactly 1/2
  for (int j = 0; j < m_out - 1; ++j)
    out.b[size_t(j)] = g_and(k, out.b[size_t(j)], k.not_(out.b[size_t(m_out - 1)]));
  return out;
}

// Plaintext instantiations of the same circuit.
EulerAngles euler_from_quat_approx(const QuatK& t, int degree, int m_out = 16);
EulerAngles euler_from_quat_approx(const Quat4& t, int degree, int m_out = 16);

}  // namespace qotp
