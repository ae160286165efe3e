#pragma once
#include <stdexcept>
#include <string>
#include <vector>

#include "qotp/crot.hpp"
#include "qotp/qsim.hpp"

namespace qotp {

// The assembled scheme: a quaternion one-time pad on each qubit, classical
// gate-key updates for 1-qubit gates, and a CNOT rule that strips both pads
// down to Pauli form with encrypted conditional rotations, applies the CNOT,
// and re-encrypts the migrated Pauli pads as fresh gate keys. Every classical
// step is a bit circuit over a backend, so the mock and lattice evaluations
// share one code path.

// ---- pad layer ---------------------------------------------------------------

// Gate key sampler: three uniform k-bit fractions rejected until their squares
// sum below one, a fourth completing the norm (floor of the exact square
// root, so the norm lands in [1 - 2^{-k+1}, 1]), then a uniform signed
// permutation. k = 1 degenerates to the Pauli pad.
QuatK qotp_keygen(int k, Rng& rng);

// Pad / unpad one qubit. Encryption applies the unitary approximation of the
// key; decryption the unitary approximation of the conjugate (exact inverse
// when the key is unit).
void qotp_enc(const QuatK& key, StateVector& s, int qubit);
void qotp_dec(const QuatK& key, StateVector& s, int qubit);

// The quaternion whose rotation is Z^{x1} X^{x2} up to phase:
// ((1-x1)(1-x2), x2(1-x1), x1(1-x2), -x1*x2).
Quat4 pauli_embed(int x1, int x2);

// Mean density matrix of the pad over `trials` fresh keys applied to a fixed
// one-qubit state. Chunked across a thread pool with per-chunk forked streams;
// the result is a pure function of (k, psi, trials, rng state).
Mat2 security_trial(int k, const StateVector& psi, long trials, Rng& rng);

// ---- circuits ----------------------------------------------------------------

struct Gate1Q {
  int qubit = 0;
  QuatK q;
};
struct CnotGate {
  int control = 0, target = 0;
};
// One level: the 1-qubit gates run first (in list order), then one layer of
// pairwise-disjoint CNOTs.
struct CircuitLevel {
  std::vector<Gate1Q> gates;
  std::vector<CnotGate> cnots;
};
struct Circuit {
  std::vector<CircuitLevel> levels;
};

// k-bit truncations of the standard gates. gate_rz(turns) is
// diag(1, e^{2 pi i turns}) up to phase.
QuatK gate_h(int k);
QuatK gate_rz(double turns, int k);
QuatK gate_from_matrix(const Mat2& g, int k);  // throws unless g is unitary
QuatK gate_from_euler(double alpha, double beta, double gamma, int k);

// Builders. append_1q/append_cnot open a new level only when the current one
// already has its CNOT layer, so gate-then-CNOT sequences pack into one level.
void append_1q(Circuit& c, int qubit, const QuatK& g);
void append_cnot(Circuit& c, int control, int target);
void append_swap(Circuit& c, int a, int b);
// Controlled phase rotation by `turns`, expanded into the exact five-gate
// form R(c) R(t) CNOT R^{-1}(t) CNOT with half angles (three levels).
void append_crot(Circuit& c, int control, int target, double turns, int k);
Circuit qft_circuit(int n, int k);

// Plaintext reference evaluation of a circuit (each quaternion gate applied
// through its unitary approximation).
void simulate_circuit(const Circuit& c, StateVector& q);

// ---- scheme parameters and keys ------------------------------------------------

struct QheParams {
  int lambda = 16;
  int levels = 1;  // L: circuit levels the key chain supports
  int kbits = 16;  // k: pad precision
  int euler_degree = 128;  // series degree of the angle-conversion kernel
  // measured classical cost per level, probed on the mock backend at this k
  // (gate counts are backend-independent): one gate-key update, and the
  // CNOT conversion work for both qubits. The chain's per-window depth
  // budget is what the backend enforces between refreshes.
  long mul_nands = 0, mul_refreshes = 0;
  long cnot_nands = 0, cnot_refreshes = 0;
  int depth_budget = 0;  // 0 = untracked (mock default)

  int slots() const { return 3 * kbits * levels + 1; }
  int hops_per_level() const { return 3 * kbits; }
};

// Validates the shape, picks the conversion degree (max(64, 8k) unless
// overridden), and measures the per-level cost counters.
QheParams qhe_params(int lambda, int L, int k, int euler_degree = 0);

// The "typical choice" preset k = round(log2(lambda)^2), clamped to the
// fixed-point range.
int kbits_typical(int lambda);

struct QheKeys {
  LatticeKeyChain chain;
  QheParams prm;
};
QheKeys qhe_keygen(const LweParams& p, int lambda, int L, int k, Rng& rng);

struct QheMockKeys {
  MockKeyChain chain;
  QheParams prm;
};
QheMockKeys qhe_keygen_mock(int lambda, int L, int k, int euler_degree = 0);

// Publishable part of a key chain: per-slot public keys plus the encrypted
// slot-to-slot links. No trapdoor, secret bits, or secret vectors.
struct QhePublicInfo {
  LweParams p;
  int kbits = 0, levels = 0;
  std::vector<MhePublicKey> pks;
  std::vector<LatticeKeyChain::Link> links;
};
QhePublicInfo public_info(const LatticeKeyChain& ch);
void save_public_info(const std::string& path, const QhePublicInfo& pi);
QhePublicInfo load_public_info(const std::string& path);

// ---- ciphertexts ---------------------------------------------------------------

template <class B>
struct QotpCiphertext {
  int qubit = 0;
  EncQuat<B> key;  // encrypted gate key; every bit lives at key slot `slot`
  int slot = 0;
  long gates = 0;  // 1-qubit gates folded in since the pad was last exact
};

// Pads each qubit of psi in place with a fresh key and returns the key
// ciphertexts, all encrypted at slot 0.
template <class B>
std::vector<QotpCiphertext<B>> qhe_enc(B& k, StateVector& psi, int kbits, Rng& rng) {
  std::vector<QotpCiphertext<B>> cts;
  cts.reserve(size_t(psi.n));
  for (int q = 0; q < psi.n; ++q) {
    QuatK key = qotp_keygen(kbits, rng);
    qotp_enc(key, psi, q);
    cts.push_back({q, encrypt_quat(k, key, 0), 0, 0});
  }
  return cts;
}

// Decrypts the gate keys with the tail key of the chain and removes the pads.
// Keys that have not been switched all the way to the tail are refused: that
// is the only slot whose secret a decryptor holds.
template <class B, class Chain>
void qhe_dec(const B& k, const Chain& ch, const std::vector<QotpCiphertext<B>>& cts,
             StateVector& psi) {
  for (const auto& ct : cts)
    if (ct.slot != ch.slots() - 1)
      throw std::invalid_argument("qhe_dec: gate key not at the chain tail (slot " +
                                  std::to_string(ct.slot) + " of " + std::to_string(ch.slots()) +
                                  ")");
  for (const auto& ct : cts) qotp_dec(decrypt_quat(k, ct.key), psi, ct.qubit);
}

// 1-qubit gate: fold the gate's inverse into the encrypted key. The quantum
// state is never touched.
template <class B>
void eval_1q(B& k, QotpCiphertext<B>& ct, const QuatK& gate) {
  if (gate.k != ct.key.k) throw std::invalid_argument("eval_1q: gate precision mismatch");
  ct.key = eval_quat_mul_encrypted(k, ct.key, quat_inv_fixed(gate));
  ++ct.gates;
}

// Encrypted pauli_embed of a pad X^a Z^b. X^a Z^b = +-Z^b X^a, so the embed
// runs with (x1, x2) = (b, a); exactly one component is +-1 and the rest are
// zero, hence four ANDs and constant-false fraction bits.
template <class B>
EncQuat<B> pauli_embed_enc(B& k, const typename B::Bit& a, const typename B::Bit& b, int kbits) {
  auto na = k.not_(a), nb = k.not_(b);
  typename B::Bit unit[4] = {k.refresh(g_and(k, nb, na)), k.refresh(g_and(k, a, nb)),
                             k.refresh(g_and(k, b, na)), k.refresh(g_and(k, a, b))};
  EncQuat<B> t;
  t.k = kbits;
  for (int i = 0; i < 4; ++i) {
    t.c[size_t(i)].unit = unit[i];
    t.c[size_t(i)].sign = i == 3 ? unit[3] : k.constant(false);  // the -x1*x2 component
    t.c[size_t(i)].frac.assign(size_t(kbits), k.constant(false));
  }
  return t;
}

inline int chain_slots(const LatticeRotEnv& e) {
  if (!e.k.chain) throw std::logic_error("eval: backend has no key chain");
  return e.k.chain->slots();
}
inline int chain_slots(const MockRotEnv& e) { return e.ch.slots(); }

template <class Env>
EncQuat<typename Env::Backend> fwd_quat(Env& env, const EncQuat<typename Env::Backend>& t,
                                        int hops) {
  auto r = t;
  for (int h = 0; h < hops; ++h)
    for (auto& c : r.c) {
      c.sign = env.fwd(c.sign);
      c.unit = env.fwd(c.unit);
      for (auto& b : c.frac) b = env.fwd(b);
    }
  return r;
}

// CNOT between two pad-encrypted qubits. Classically converts each gate key
// to Euler angles, strips both pads to Pauli form with conditional rotations
// over the shared switching window [slot, slot + 3k), applies the CNOT, and
// migrates the Pauli pads across it:
//   CNOT (X^{a1} Z^{b1} ox X^{a2} Z^{b2}) = (X^{a1} Z^{b1^b2} ox X^{a1^a2} Z^{b2}) CNOT.
// The migrated pads are re-embedded as exact gate keys one slot past the
// window, so both ciphertexts land at slot + 3k with a fresh precision ledger.
// Slot exhaustion is checked before the state is touched.
template <class Env>
void eval_cnot(Env env, StateVector& q, QotpCiphertext<typename Env::Backend>& c1,
               QotpCiphertext<typename Env::Backend>& c2, const QheParams& prm, SimMode mode,
               Rng& rng) {
  using B = typename Env::Backend;
  B& k = env.k;
  const int m = prm.kbits;
  if (c1.key.k != m || c2.key.k != m)
    throw std::invalid_argument("eval_cnot: key precision differs from parameters");
  if (c1.qubit == c2.qubit) throw std::invalid_argument("eval_cnot: control equals target");
  if (c1.slot != c2.slot)
    throw std::invalid_argument("eval_cnot: gate keys start at different slots");
  const int base = c1.slot;
  if (base + 3 * m > chain_slots(env) - 1)
    throw std::out_of_range("eval_cnot: key chain exhausted");

  EncEuler<B> e1 = he_euler_from_quat(k, c1.key, prm.euler_degree, m);
  EncEuler<B> e2 = he_euler_from_quat(k, c2.key, prm.euler_degree, m);
  auto word = [](std::vector<typename B::Bit> v) {
    Word<B> w;
    w.bit = std::move(v);
    return w;
  };
  auto u1 = enc_cunitary(env, word(e1.a), word(e1.b), word(e1.g), q, c1.qubit, mode, rng);
  auto u2 = enc_cunitary(env, word(e2.a), word(e2.b), word(e2.g), q, c2.qubit, mode, rng);
  apply_cnot(q, c1.qubit, c2.qubit);

  // pad migration; all four mask bits sit at the last window slot
  auto b1 = k.refresh(g_xor(k, u1.d2, u2.d2));
  auto a2 = k.refresh(g_xor(k, u2.d1, u1.d1));
  c1.key = fwd_quat(env, pauli_embed_enc(k, u1.d1, b1, m), 1);
  c2.key = fwd_quat(env, pauli_embed_enc(k, a2, u2.d2, m), 1);
  c1.slot = c2.slot = base + 3 * m;
  c1.gates = c2.gates = 0;  // the pad is exact again
}

// Folds a circuit over the ciphertexts, always consuming exactly
// prm.levels * 3k switching slots: levels beyond the circuit's (and qubits a
// level leaves alone) just step forward, so decryption always happens at the
// chain tail.
template <class Env>
void eval_circuit(Env env, StateVector& q, std::vector<QotpCiphertext<typename Env::Backend>>& cts,
                  const Circuit& circ, const QheParams& prm, SimMode mode, Rng& rng) {
  using B = typename Env::Backend;
  B& k = env.k;
  if (int(circ.levels.size()) > prm.levels)
    throw std::invalid_argument("eval_circuit: circuit has more levels than the key chain");
  auto index_of = [&](int qubit) -> size_t {
    for (size_t i = 0; i < cts.size(); ++i)
      if (cts[i].qubit == qubit) return i;
    throw std::invalid_argument("eval_circuit: gate on a qubit with no ciphertext");
  };
  for (int lv = 0; lv < prm.levels; ++lv) {
    std::vector<char> switched(cts.size(), 0);
    if (lv < int(circ.levels.size())) {
      const CircuitLevel& level = circ.levels[size_t(lv)];
      for (size_t i = 0; i < level.cnots.size(); ++i)
        for (size_t j = i + 1; j < level.cnots.size(); ++j) {
          const auto &x = level.cnots[i], &y = level.cnots[j];
          if (x.control == y.control || x.control == y.target || x.target == y.control ||
              x.target == y.target)
            throw std::invalid_argument("eval_circuit: CNOT layer is not disjoint");
        }
      for (const auto& g : level.gates) eval_1q(k, cts[index_of(g.qubit)], g.q);
      for (const auto& cn : level.cnots) {
        size_t i = index_of(cn.control), j = index_of(cn.target);
        eval_cnot(env, q, cts[i], cts[j], prm, mode, rng);
        switched[i] = switched[j] = 1;
      }
    }
    for (size_t i = 0; i < cts.size(); ++i)
      if (!switched[i]) {
        cts[i].key = fwd_quat(env, cts[i].key, prm.hops_per_level());
        cts[i].slot += prm.hops_per_level();
      }
  }
}

// ---- ciphertext bundles --------------------------------------------------------

// File form of an evaluation's ciphertexts: per-qubit encrypted gate keys,
// optionally followed by a raw statevector dump. The dump exists for tests
// and demos only — it is the plaintext quantum state and voids all secrecy.
void save_ciphertexts(const std::string& path, const LweParams& p,
                      const std::vector<QotpCiphertext<LatticeBackend>>& cts,
                      const StateVector* state_dump = nullptr);
std::vector<QotpCiphertext<LatticeBackend>> load_ciphertexts(const std::string& path,
                                                             const LweParams& p,
                                                             StateVector* state_out = nullptr);
void save_ciphertexts_mock(const std::string& path,
                           const std::vector<QotpCiphertext<MockBackend>>& cts,
                           const StateVector* state_dump = nullptr);
std::vector<QotpCiphertext<MockBackend>> load_ciphertexts_mock(const std::string& path,
                                                               StateVector* state_out = nullptr);

}  // namespace qotp
