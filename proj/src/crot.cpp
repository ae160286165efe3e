#include "qotp/crot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

namespace qotp {

namespace {

// sum of (e_i / beta)^2 — the exponent of the truncated-Gaussian weight
double gauss_exponent(const std::vector<int64_t>& e, double beta) {
  double x = 0;
  for (int64_t v : e) {
    double t = double(v) / beta;
    x += t * t;
  }
  return x;
}

}  // namespace

CrotTranscript crot_step(const TrapdoorKeypair& gk, const AltCiphertext& c_zeta, double w,
                         StateVector& q, int target, SimMode mode, Rng& rng) {
  const LweParams& p = gk.pk.p;
  auto rec = alt_recover(gk, c_zeta);
  if (!rec)
    throw std::runtime_error("crot_step: control ciphertext does not open under this key");
  const int zeta = rec->mu;

  // the register measurement's branch follows the target qubit's marginal
  double w0 = 0;
  for (size_t i = 0; i < q.amp.size(); ++i)
    if (!((i >> target) & 1)) w0 += std::norm(q.amp[i]);
  CrotTranscript t;
  t.branch = (rng.unit_double() < w0) ? 0 : 1;

  // Fresh register randomness for the measured branch. The other branch's
  // noise is pinned by c_zeta's, so draws that push it off the truncated
  // support have no partner and are redrawn (counted: that discarded
  // fraction is the two branches' distinguishable part).
  const int64_t bf = int64_t(p.beta_f);
  int u = 0;
  std::vector<uint64_t> s(size_t(p.n), 0);
  std::vector<int64_t> e;
  for (;;) {
    u = rng.next_bit() ? 1 : 0;
    for (auto& x : s) x = rng.next_u64() & p.mask();
    e = sample_gaussian_vec(p.m + 1, p.beta_f, p.q, rng);
    bool ok = true;
    for (int i = 0; i <= p.m && ok; ++i) {
      int64_t o = (t.branch == 0) ? e[size_t(i)] - rec->e[size_t(i)]
                                  : e[size_t(i)] + rec->e[size_t(i)];
      ok = (o >= -bf && o <= bf);
    }
    if (ok) break;
    ++t.s_events;
  }

  // both preimages: branch 0's randomness exceeds branch 1's by c_zeta's
  const uint64_t mask = p.mask();
  if (t.branch == 0) {
    t.u0 = u;
    t.u1 = u ^ zeta;
    t.r0.s = s;
    t.r0.e = e;
    t.r1.s.resize(s.size());
    t.r1.e.resize(e.size());
    for (size_t i = 0; i < s.size(); ++i) t.r1.s[i] = (s[i] - rec->s[i]) & mask;
    for (size_t i = 0; i < e.size(); ++i) t.r1.e[i] = e[i] - rec->e[i];
  } else {
    t.u1 = u;
    t.u0 = u ^ zeta;
    t.r1.s = s;
    t.r1.e = e;
    t.r0.s.resize(s.size());
    t.r0.e.resize(e.size());
    for (size_t i = 0; i < s.size(); ++i) t.r0.s[i] = (s[i] + rec->s[i]) & mask;
    for (size_t i = 0; i < e.size(); ++i) t.r0.e[i] = e[i] + rec->e[i];
  }
  t.y = alt_encode(gk.pk, t.u0, t.r0.s, t.r0.e);

  // Hadamard measurement of the register: exactly uniform bits, one per
  // register qubit; d1 = <d, (u0,r0) xor (u1,r1)> over packed bit strings
  const int pbits = 1 + (p.n + p.m + 1) * p.logq;
  t.d.resize(size_t(pbits));
  for (auto& b : t.d) b = uint8_t(rng.next_bit() ? 1 : 0);
  size_t idx = 0;
  int d1 = 0;
  auto fold = [&](uint64_t x, int nbits) {
    for (int b = 0; b < nbits; ++b, ++idx) d1 ^= int(t.d[idx]) & int((x >> b) & 1);
  };
  fold(uint64_t(t.u0 ^ t.u1), 1);
  for (size_t i = 0; i < t.r0.s.size(); ++i) fold(t.r0.s[i] ^ t.r1.s[i], p.logq);
  for (size_t i = 0; i < t.r0.e.size(); ++i)
    fold((uint64_t(t.r0.e[i]) & mask) ^ (uint64_t(t.r1.e[i]) & mask), p.logq);
  t.d1 = d1;
  t.d2 = t.u0 & zeta;

  // collapse onto the data qubit: phases e^{-2 pi i w u_j}, the Z mask, and
  // (ExactSampling) each branch's Gaussian density at its noise vector
  double x0 = 0, x1 = 0;
  if (mode == SimMode::ExactSampling) {
    x0 = gauss_exponent(t.r0.e, double(p.beta_f));
    x1 = gauss_exponent(t.r1.e, double(p.beta_f));
  }
  const double xmin = std::min(x0, x1);
  const double pi = std::numbers::pi;
  Mat2 D{};
  D.m[0][0] = std::polar(std::exp(-pi * (x0 - xmin) / 2), -2 * pi * w * t.u0);
  D.m[1][1] = std::polar(std::exp(-pi * (x1 - xmin) / 2), -2 * pi * w * t.u1) *
              (t.d1 ? -1.0 : 1.0);
  apply_1q(q, target, D, false);
  q.normalize();
  return t;
}

BranchState branch_state_exact(const std::vector<int64_t>& omega,
                               const std::vector<int64_t>& e_shift, cplx c0, cplx c1,
                               uint64_t beta_f) {
  if (omega.size() != e_shift.size() || omega.empty())
    throw std::invalid_argument("branch_state_exact: dimension mismatch");
  const int64_t bf = int64_t(beta_f);
  bool in0 = true, in1 = true;
  for (size_t i = 0; i < omega.size(); ++i) {
    if (omega[i] < -bf || omega[i] > bf) in0 = false;
    const int64_t o = omega[i] + e_shift[i];
    if (o < -bf || o > bf) in1 = false;
  }
  if (!in0 && !in1) throw std::invalid_argument("branch_state_exact: outside both supports");
  double x0 = 0, x1 = 0;
  const double bfd = double(beta_f);
  for (size_t i = 0; i < omega.size(); ++i) {
    const double a = double(omega[i]) / bfd;
    const double b = double(omega[i] + e_shift[i]) / bfd;
    x0 += a * a;
    x1 += b * b;
  }
  const double pi = std::numbers::pi;
  BranchState out;
  out.ratio = !in0   ? std::numeric_limits<double>::infinity()
              : !in1 ? 0.0
                     : std::exp(-pi * (x1 - x0));
  const double xref = in0 && in1 ? std::min(x0, x1) : (in0 ? x0 : x1);
  const double a0 = in0 ? std::exp(-pi * (x0 - xref) / 2) : 0.0;
  const double a1 = in1 ? std::exp(-pi * (x1 - xref) / 2) : 0.0;
  out.state.n = 1;
  out.state.amp = {c0 * a0, c1 * a1};
  if (!(out.state.norm() > 0))
    throw std::runtime_error("branch_state_exact: zero-amplitude state");
  out.state.normalize();
  return out;
}

std::string transcript_json(const CrotTranscript& t) {
  nlohmann::ordered_json j;
  j["y"] = t.y.c;
  j["d"] = t.d;
  j["u0"] = t.u0;
  j["u1"] = t.u1;
  j["r0"] = {{"s", t.r0.s}, {"e", t.r0.e}};
  j["r1"] = {{"s", t.r1.s}, {"e", t.r1.e}};
  j["d1"] = t.d1;
  j["d2"] = t.d2;
  j["branch"] = t.branch;
  j["s_events"] = t.s_events;
  return j.dump(2);
}

// ---- backend wrappers --------------------------------------------------------

CrotTranscript enc_ctrl_rot_1bit(LatticeBackend& k, double w, const LatticeBackend::Bit& zeta,
                                 StateVector& q, int target, SimMode mode, Rng& rng) {
  LatticeBackend::Bit z = zeta;
  if (z.plain >= 0) z = k.encrypt(z.plain != 0, 0);
  const LatticeKeyChain& ch = *k.chain;
  if (z.slot < 0 || size_t(z.slot) >= ch.slots())
    throw std::out_of_range("enc_ctrl_rot_1bit: control bit has no key slot");
  const TrapdoorKeypair& gk = ch.keys[size_t(z.slot)];
  return crot_step(gk, *k.to_alt(z).alt, w, q, target, mode, rng);
}

CrotTranscript enc_ctrl_rot_1bit(MockBackend& k, const TrapdoorKeypair& gk, double w,
                                 const MockBackend::Bit& zeta, StateVector& q, int target,
                                 SimMode mode, Rng& rng) {
  // the mock chain has no lattice side: stand in for the converted control
  // ciphertext with a fresh encryption at the conversion's noise level
  const int zv = k.decrypt(zeta) ? 1 : 0;
  AltCiphertext c = alt_enc(gk.pk, zv, rng, gk.pk.p.beta_c());
  return crot_step(gk, c, w, q, target, mode, rng);
}

KeyedStep<LatticeBackend> enc_ctrl_rot_1bit_keyed(LatticeBackend& k, double w,
                                                  const LatticeBackend::Bit& zeta,
                                                  StateVector& q, int target, SimMode mode,
                                                  Rng& rng) {
  LatticeBackend::Bit z = zeta;
  if (z.plain >= 0) z = k.encrypt(z.plain != 0, 0);
  const LatticeKeyChain& ch = *k.chain;
  if (z.slot < 0 || size_t(z.slot) + 1 >= ch.slots())
    throw std::out_of_range("enc_ctrl_rot_1bit_keyed: no key slot past the control's");
  const TrapdoorKeypair& gk = ch.keys[size_t(z.slot)];
  KeyedStep<LatticeBackend> out;
  out.t = crot_step(gk, *k.to_alt(z).alt, w, q, target, mode, rng);
  out.d1 = k.encrypt(out.t.d1 != 0, z.slot + 1);
  // u0 * zeta with u0 in the clear: the control rides the switch, or dies
  out.d2 = out.t.u0 ? key_switch(k, ch, z) : k.encrypt(false, z.slot + 1);
  return out;
}

KeyedStep<MockBackend> enc_ctrl_rot_1bit_keyed(MockBackend& k, const MockKeyChain& ch,
                                               const TrapdoorKeypair& gk, double w,
                                               const MockBackend::Bit& zeta, StateVector& q,
                                               int target, SimMode mode, Rng& rng) {
  MockBackend::Bit z = zeta;
  if (z.plain >= 0) z = k.encrypt(z.plain != 0, 0);
  if (z.slot < 0 || size_t(z.slot) + 1 >= ch.slots())
    throw std::out_of_range("enc_ctrl_rot_1bit_keyed: no key slot past the control's");
  const int zv = k.decrypt(z) ? 1 : 0;
  AltCiphertext c = alt_enc(gk.pk, zv, rng, gk.pk.p.beta_c());
  KeyedStep<MockBackend> out;
  out.t = crot_step(gk, c, w, q, target, mode, rng);
  out.d1 = k.encrypt(out.t.d1 != 0, z.slot + 1);
  out.d2 = k.encrypt((out.t.u0 & zv) != 0, z.slot + 1);
  return out;
}

}  // namespace qotp
