#pragma once
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qotp/hebackend.hpp"
#include "qotp/lattice.hpp"
#include "qotp/qsim.hpp"
#include "qotp/rng.hpp"

namespace qotp {

// Encrypted conditional rotations driven by an encrypted angle.
//
// The underlying protocol entangles the data qubit with two huge registers
// (every bit of a lattice vector gets a qubit) and measures them away. A
// statevector of that size is out of reach, but none is needed: the register
// measurement commutes with everything after it, so its outcome is an honest
// classical sample, and the Hadamard-basis string d is exactly uniform
// because the data qubit keeps the two branches orthogonal. The simulation
// therefore samples the transcript classically and touches only the data
// qubit, either with the closed-form operator the transcript implies
// (Idealized) or with the branch amplitudes reweighted by the truncated
// Gaussian density at the sampled noise vectors (ExactSampling), which is the
// exact post-measurement state. The two agree up to the density ratio between
// the branches, which the eta parameter drives toward 1.
enum class SimMode { Idealized, ExactSampling };

// Everything one 1-bit rotation step reveals, opened for audits. Every run
// satisfies, coordinate-wise mod q:
//   alt_encode(u0; r0) == alt_xor(alt_encode(u1; r1), c_zeta)
// where c_zeta is the vector form of the control bit's encryption.
struct CrotTranscript {
  AltCiphertext y;         // measured register G = alt encoding of (u0; r0)
  std::vector<uint8_t> d;  // 1 + (m+n+1)*log2(q) Hadamard measurement bits
  int u0 = 0, u1 = 0;      // branch plaintexts, u1 = u0 xor zeta
  AltOpening r0, r1;       // branch randomness; e coordinates stored centered
  int d1 = 0;              // <d, (u0,r0) xor (u1,r1)> mod 2: the Z-mask bit
  int d2 = 0;              // u0 * zeta: exponent of the leftover doubled rotation
  int branch = 0;          // which branch carried the fresh Gaussian draw
  uint64_t s_events = 0;   // support-mismatch draws discarded before this one
};

std::string transcript_json(const CrotTranscript& t);

// Post-measurement data qubit with branch 0 weighted by the truncated
// Gaussian density at omega and branch 1 by the density at omega + e_shift.
// ratio = rho1(omega)/rho0(omega) = exp(-pi(2 omega.e_shift + |e_shift|^2)/beta_f^2)
// is the deviation diagnostic (0 or inf when only one branch is in support).
// Throws std::invalid_argument when omega lies outside both supports.
struct BranchState {
  StateVector state;  // one qubit, normalized
  double ratio = 1.0;
};
BranchState branch_state_exact(const std::vector<int64_t>& omega,
                               const std::vector<int64_t>& e_shift, cplx c0, cplx c1,
                               uint64_t beta_f);

// One 1-bit controlled rotation on `target` of q. Applies, up to global phase,
//   Z^{d1} R^{d2}_{2w} R^{-zeta}_{w}
// exactly (Idealized) or with the branch reweighting (ExactSampling), where
// zeta is the plaintext of c_zeta. gk is the key the G register lives under;
// its trapdoor recovers zeta and the randomness of c_zeta, which is what
// reconstructing both measurement preimages takes. Out-of-support draws are
// discarded and counted (transcript.s_events).
CrotTranscript crot_step(const TrapdoorKeypair& gk, const AltCiphertext& c_zeta, double w,
                         StateVector& q, int target, SimMode mode, Rng& rng);

// ---- backend-facing wrappers ------------------------------------------------

// Control bit held by the homomorphic backend. The lattice backend takes the
// register key from the bit's own chain slot; the mock backend has no lattice
// side, so the caller lends it a register keypair of its own.
CrotTranscript enc_ctrl_rot_1bit(LatticeBackend& k, double w, const LatticeBackend::Bit& zeta,
                                 StateVector& q, int target, SimMode mode, Rng& rng);
CrotTranscript enc_ctrl_rot_1bit(MockBackend& k, const TrapdoorKeypair& gk, double w,
                                 const MockBackend::Bit& zeta, StateVector& q, int target,
                                 SimMode mode, Rng& rng);

// Keyed form: additionally delivers both measured bits encrypted one slot past
// the control's, ready for the next step's homomorphic bookkeeping. d2 rides
// through key_switch when u0 = 1 (the plaintext-by-ciphertext product
// u0 * zeta); d1 is encrypted fresh from the opened transcript, which is the
// clear-trapdoor counterpart of inverting y under the encrypted trapdoor.
template <class B>
struct KeyedStep {
  CrotTranscript t;
  typename B::Bit d1, d2;
};
KeyedStep<LatticeBackend> enc_ctrl_rot_1bit_keyed(LatticeBackend& k, double w,
                                                  const LatticeBackend::Bit& zeta,
                                                  StateVector& q, int target, SimMode mode,
                                                  Rng& rng);
KeyedStep<MockBackend> enc_ctrl_rot_1bit_keyed(MockBackend& k, const MockKeyChain& ch,
                                               const TrapdoorKeypair& gk, double w,
                                               const MockBackend::Bit& zeta, StateVector& q,
                                               int target, SimMode mode, Rng& rng);

// ---- multi-bit loop ----------------------------------------------------------

// The multi-bit ops below are one algorithm over either backend; an
// environment binds the backend to wherever its register keys and switching
// links live.
struct LatticeRotEnv {
  using Backend = LatticeBackend;
  LatticeBackend& k;
  KeyedStep<LatticeBackend> step(double w, const LatticeBackend::Bit& z, StateVector& q,
                                 int target, SimMode mode, Rng& rng) {
    return enc_ctrl_rot_1bit_keyed(k, w, z, q, target, mode, rng);
  }
  LatticeBackend::Bit fwd(const LatticeBackend::Bit& b) { return key_switch(k, *k.chain, b); }
};

struct MockRotEnv {
  using Backend = MockBackend;
  MockBackend& k;
  const MockKeyChain& ch;
  const TrapdoorKeypair& gk;  // register-side keypair, reused across steps
  KeyedStep<MockBackend> step(double w, const MockBackend::Bit& z, StateVector& q, int target,
                              SimMode mode, Rng& rng) {
    return enc_ctrl_rot_1bit_keyed(k, ch, gk, w, z, q, target, mode, rng);
  }
  MockBackend::Bit fwd(const MockBackend::Bit& b) { return key_switch(k, ch, b); }
};

template <class Env>
Word<typename Env::Backend> fwd_word(Env& env, const Word<typename Env::Backend>& a, int hops) {
  auto r = a;
  for (int h = 0; h < hops; ++h)
    for (auto& b : r.bit) b = env.fwd(b);
  return r;
}

template <class Env>
struct RotOut {
  std::vector<CrotTranscript> steps;  // one per 1-bit rotation (empty when m = 1)
  std::vector<uint64_t> angle_trace;  // decrypted residual angle after each merge
  typename Env::Backend::Bit d;       // Z-mask bit, slot = control slot + m - 1
};

// Conditional phase rotation by an encrypted m-bit angle: leaves the state
//   Z^{d} R^{-1}_{alpha} |k>   (up to global phase)
// and returns Enc(d) at the last consumed slot. Peels the angle LSB-first;
// each step's leftover doubled rotation R^{b}_{2w} is folded back into the
// remaining angle (adding b at the new LSB, carry dropped = mod 1), so only a
// Z-power survives. A one-bit angle needs no quantum step at all: R_{1/2} = Z,
// so the angle bit already is the mask bit.
template <class Env>
RotOut<Env> enc_crot(Env env, const Word<typename Env::Backend>& alpha, StateVector& q,
                     int target, SimMode mode, Rng& rng) {
  auto& k = env.k;
  const int m = alpha.width();
  if (m < 1) throw std::invalid_argument("enc_crot: empty angle");
  RotOut<Env> out;
  if (m == 1) {
    out.d = alpha.bit[0];
    return out;
  }
  auto st = env.step(std::ldexp(1.0, -m), alpha.bit[0], q, target, mode, rng);
  out.steps.push_back(st.t);
  auto dacc = st.d1;  // running xor of the measured mask bits
  Word<typename Env::Backend> acc;
  for (int i = 1; i < m; ++i) acc.bit.push_back(env.fwd(alpha.bit[size_t(i)]));
  acc = w_refresh(k, w_add_bit(k, acc, st.d2));
  out.angle_trace.push_back(dec_frac(k, acc));
  for (int l = 1; l <= m - 2; ++l) {
    auto sl = env.step(std::ldexp(1.0, l - m), acc.bit[0], q, target, mode, rng);
    out.steps.push_back(sl.t);
    Word<typename Env::Backend> rest;
    for (int i = 1; i < acc.width(); ++i) rest.bit.push_back(env.fwd(acc.bit[size_t(i)]));
    acc = w_refresh(k, w_add_bit(k, rest, sl.d2));
    out.angle_trace.push_back(dec_frac(k, acc));
    dacc = k.refresh(g_xor(k, sl.d1, env.fwd(dacc)));
  }
  out.d = g_xor(k, dacc, acc.bit[0]);
  return out;
}

// T-type counterpart via the fixed change of basis S: leaves, up to global
// phase,  Z^{d} X^{d} T^{-1}_{alpha} |k>.
inline Mat2 rot_basis_s() {
  const double r = 1.0 / std::sqrt(2.0);
  Mat2 s{};
  s.m[0][0] = {r, 0};
  s.m[0][1] = {r, 0};
  s.m[1][0] = {0, r};
  s.m[1][1] = {0, -r};
  return s;
}

template <class Env>
RotOut<Env> enc_ctrot(Env env, const Word<typename Env::Backend>& alpha, StateVector& q,
                      int target, SimMode mode, Rng& rng) {
  const Mat2 s = rot_basis_s();
  apply_1q(q, target, s.dagger());
  auto out = enc_crot(env, alpha, q, target, mode, rng);
  apply_1q(q, target, s);
  return out;
}

// Conditional single-qubit unitary U(alpha,beta,gamma) = R_a T_b R_g by three
// encrypted m-bit Euler angles starting at one slot. Leaves, up to global
// phase,  X^{d1} Z^{d2} U^{-1} |k>  with d1 = w2 and d2 = w1^w2^w3, both
// delivered at the last of the 3m consumed slots.
template <class Env>
struct CondUnitaryOut {
  RotOut<Env> run[3];  // the R, T, R passes with their transcripts
  typename Env::Backend::Bit d1, d2;
};

template <class Env>
CondUnitaryOut<Env> enc_cunitary(Env env, const Word<typename Env::Backend>& alpha,
                                 const Word<typename Env::Backend>& beta,
                                 const Word<typename Env::Backend>& gamma, StateVector& q,
                                 int target, SimMode mode, Rng& rng) {
  auto& k = env.k;
  const int m = alpha.width();
  if (m < 1 || beta.width() != m || gamma.width() != m)
    throw std::invalid_argument("enc_cunitary: angle widths differ");
  CondUnitaryOut<Env> out;
  // undo R_alpha; the leftover T_beta picks up (-1)^{w1}
  out.run[0] = enc_crot(env, alpha, q, target, mode, rng);
  auto b2 = fwd_word(env, beta, m - 1);
  b2 = w_refresh(k, negate_mod1(k, out.run[0].d, b2));
  b2 = fwd_word(env, b2, 1);
  // undo T_{(-1)^{w1} beta}; the leftover R_gamma picks up (-1)^{w2}
  out.run[1] = enc_ctrot(env, b2, q, target, mode, rng);
  auto g2 = fwd_word(env, gamma, 2 * m - 1);
  g2 = w_refresh(k, negate_mod1(k, out.run[1].d, g2));
  g2 = fwd_word(env, g2, 1);
  out.run[2] = enc_crot(env, g2, q, target, mode, rng);
  // masks land at the last slot: d1 = w2, d2 = w1 ^ w2 ^ w3
  auto d1 = out.run[1].d;
  for (int h = 0; h < m; ++h) d1 = env.fwd(d1);
  auto w1 = out.run[0].d;
  for (int h = 0; h < 2 * m; ++h) w1 = env.fwd(w1);
  out.d1 = d1;
  out.d2 = g_xor(k, k.refresh(g_xor(k, w1, d1)), out.run[2].d);
  return out;
}

// Conditional P gate from a single encrypted control bit a, realized as the
// two-bit angle a/4. The rotation leaves Z^{d} R^{-1}_{a/4} |k>, and
// Z^{d} R^{-1}_{a/4} = Z^{d xor a} P^{a} exactly, so the returned mask is
// d xor a and the state is Z^{d xor a} P^{a} |k>.
template <class Env>
struct PGateOut {
  RotOut<Env> rot;
  typename Env::Backend::Bit d;  // net Z-mask, one slot past the control's
};

template <class Env>
PGateOut<Env> enc_p_gate(Env env, const typename Env::Backend::Bit& enc_a, StateVector& q,
                         int target, SimMode mode, Rng& rng) {
  auto& k = env.k;
  Word<typename Env::Backend> ang;
  ang.bit.push_back(enc_a);             // weight 1/4
  ang.bit.push_back(k.constant(false));  // weight 1/2
  auto rot = enc_crot(env, ang, q, target, mode, rng);
  auto d = g_xor(k, rot.d, env.fwd(enc_a));
  return {std::move(rot), std::move(d)};
}

}  // namespace qotp
