#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qotp/qfhe.hpp"
#include "qotp/serialize.hpp"

using namespace qotp;

namespace {

LweParams xs_params() { return make_params("circuit_xs", 2, 2, 2, 6, 8, 3, 2, 1); }
LweParams reg_params(int eta) { return make_params("reg_tiny", 2, 1, 1, 4, 12, 2, 1, eta); }

// register-side keypair shared by every mock rotation environment
const TrapdoorKeypair& reg_keypair() {
  static const TrapdoorKeypair kp = [] {
    Rng r(0x9e1);
    return gen_trap(reg_params(1), r);
  }();
  return kp;
}

Quat4 random_unit(Rng& rng) {
  for (;;) {
    Quat4 t{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    double n = std::sqrt(t.norm2());
    if (n < 1e-3) continue;
    for (int i = 0; i < 4; ++i) t[size_t(i)] /= n;
    return t;
  }
}

StateVector random_state(int n, Rng& rng) {
  StateVector s = StateVector::basis(n, 0);
  for (;;) {
    for (auto& a : s.amp) a = {rng.normal(), rng.normal()};
    if (s.norm() > 1e-3) break;
  }
  s.normalize();
  return s;
}

// y_j = sum_x amp_x e^{2 pi i x j / N} / sqrt(N) on the raw amplitude index
StateVector dft_state(const StateVector& in) {
  StateVector out = in;
  const size_t N = in.amp.size();
  for (size_t y = 0; y < N; ++y) {
    cplx s = 0;
    for (size_t x = 0; x < N; ++x)
      s += in.amp[x] * std::polar(1.0, 2 * std::numbers::pi * double((x * y) % N) / double(N));
    out.amp[y] = s / std::sqrt(double(N));
  }
  return out;
}

double l2_distance(const StateVector& a, const StateVector& b) {
  return std::sqrt(2.0) * h_distance(a, b);
}

bool same_amps(const StateVector& a, const StateVector& b) {
  return a.amp.size() == b.amp.size() &&
         std::memcmp(a.amp.data(), b.amp.data(), a.amp.size() * sizeof(cplx)) == 0;
}

Mat2 mat_i() { return Mat2::eye(); }
Mat2 mat_x() {
  Mat2 r{};
  r.m[0][1] = r.m[1][0] = 1;
  return r;
}
Mat2 mat_z() {
  Mat2 r = Mat2::eye();
  r.m[1][1] = -1;
  return r;
}
Mat2 mat_mul(const Mat2& a, const Mat2& b) {
  Mat2 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 2; ++l) r.m[i][j] += a.m[i][l] * b.m[l][j];
  return r;
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(bool(is));
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string u64_le(uint64_t v) {
  std::string s(8, '\0');
  for (int i = 0; i < 8; ++i) s[size_t(i)] = char(v >> (8 * i));
  return s;
}

// exact norm of a k-bit key, through integer arithmetic
double key_norm(const QuatK& q) {
  unsigned __int128 s = 0;
  for (const auto& c : q.c) {
    auto m = (unsigned __int128)(c.num < 0 ? -c.num : c.num);
    s += m * m;
  }
  return double(std::sqrt((long double)s) / std::ldexp(1.0L, q.k));
}

}  // namespace

// ---- gate key sampler ------------------------------------------------------------

TEST_CASE("key sampler stays on the k-bit grid with near-unit norm") {
  Rng rng(41);
  for (int k : {8, 20}) {
    const double slack = std::ldexp(4.0, -k);  // norm window half-width 2^{-k+2}
    for (int i = 0; i < 10000; ++i) {
      QuatK q = qotp_keygen(k, rng);
      REQUIRE(q.k == k);
      for (const auto& c : q.c) {
        REQUIRE(c.k == k);
        REQUIRE(std::llabs(c.num) <= (int64_t(1) << k));
      }
      const double n = key_norm(q);
      REQUIRE(n >= 1 - slack);
      REQUIRE(n <= 1 + slack);
    }
  }
  // the wide end of the fixed-point range works too
  for (int i = 0; i < 200; ++i) {
    const double n = key_norm(qotp_keygen(40, rng));
    REQUIRE(n >= 1 - std::ldexp(4.0, -40));
    REQUIRE(n <= 1 + std::ldexp(4.0, -40));
  }
  CHECK_THROWS_AS((void)qotp_keygen(0, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)qotp_keygen(63, rng), std::invalid_argument);
}

TEST_CASE("key sampler permutes positions and draws signs uniformly") {
  Rng rng(42);
  const int draws = 4096;
  long pos_count[4] = {0, 0, 0, 0};
  long neg = 0, nonzero = 0;
  for (int i = 0; i < draws; ++i) {
    QuatK q = qotp_keygen(16, rng);
    int arg = 0;
    for (int j = 1; j < 4; ++j)
      if (std::llabs(q.c[size_t(j)].num) > std::llabs(q.c[size_t(arg)].num)) arg = j;
    ++pos_count[arg];
    for (const auto& c : q.c)
      if (c.num != 0) {
        ++nonzero;
        if (c.num < 0) ++neg;
      }
  }
  // the largest-magnitude component lands on each slot equally iff the signed
  // permutation is uniform: chi-square, 3 dof, 0.001 cutoff
  double chi2 = 0;
  for (long c : pos_count) {
    const double d = double(c) - draws / 4.0;
    chi2 += d * d / (draws / 4.0);
  }
  CHECK(chi2 < 16.27);
  // sign bits are fair coins on nonzero components (16k samples, ~7 sigma slack)
  const double frac = double(neg) / double(nonzero);
  CHECK(frac > 0.47);
  CHECK(frac < 0.53);
}

TEST_CASE("one-bit keys live on the half-integer grid and cover the Pauli set") {
  Rng rng(43);
  const Mat2 pauli[4] = {mat_i(), mat_x(), mat_z(), mat_mul(mat_x(), mat_z())};
  std::set<std::pair<int, int>> unit_seen;  // (position, sign) of the unit keys
  bool mixed_seen = false;
  for (int i = 0; i < 2000; ++i) {
    QuatK q = qotp_keygen(1, rng);
    int nonzero = 0, unit_pos = -1;
    for (int j = 0; j < 4; ++j) {
      REQUIRE(std::llabs(q.c[size_t(j)].num) <= 2);  // grid {0, +-1/2, +-1}
      if (q.c[size_t(j)].num != 0) ++nonzero;
      if (std::llabs(q.c[size_t(j)].num) == 2) unit_pos = j;
    }
    if (nonzero == 1 && unit_pos >= 0) {
      unit_seen.insert({unit_pos, q.c[size_t(unit_pos)].num < 0 ? -1 : 1});
      // a unit key acts as the matching Pauli up to a global phase
      const Mat2 u = quat_to_matrix(unitary_approx(q.value()));
      CHECK(spectral_distance_up_to_phase(u, pauli[unit_pos]) < 1e-12);
    }
    if (nonzero >= 2) mixed_seen = true;
  }
  CHECK(unit_seen.size() == 8);  // all of +-1, +-X, +-Z, +-XZ showed up
  // the one-bit pad strictly contains the Pauli pad
  CHECK(mixed_seen);
}

// ---- pad layer ---------------------------------------------------------------------

TEST_CASE("pauli embed hits the four advertised quaternions") {
  CHECK(pauli_embed(0, 0) == Quat4{1, 0, 0, 0});
  CHECK(pauli_embed(0, 1) == Quat4{0, 1, 0, 0});
  CHECK(pauli_embed(1, 0) == Quat4{0, 0, 1, 0});
  CHECK(pauli_embed(1, 1) == Quat4{0, 0, 0, -1});
  for (int x1 : {0, 1})
    for (int x2 : {0, 1}) {
      const Mat2 zx = mat_mul(x1 ? mat_z() : mat_i(), x2 ? mat_x() : mat_i());
      CHECK(spectral_distance_up_to_phase(quat_to_matrix(pauli_embed(x1, x2)), zx) < 1e-12);
    }
}

TEST_CASE("pad encrypt and decrypt") {
  Rng rng(44);
  SUBCASE("the identity key leaves the state alone") {
    StateVector s = random_state(1, rng);
    const StateVector s0 = s;
    qotp_enc(truncate_k(Quat4{1, 0, 0, 0}, 16), s, 0);
    CHECK(l2_distance(s, s0) < 1e-15);
  }
  SUBCASE("the (0,1,0,0) key maps |0> to i|1>") {
    StateVector s = StateVector::basis(1, 0);
    qotp_enc(truncate_k(Quat4{0, 1, 0, 0}, 16), s, 0);
    CHECK(std::abs(s.amp[0]) < 1e-15);
    CHECK(std::abs(s.amp[1] - cplx(0, 1)) < 1e-15);
  }
  SUBCASE("one-bit keys round-trip exactly up to phase") {
    for (int rep = 0; rep < 50; ++rep) {
      const QuatK q = qotp_keygen(1, rng);
      StateVector s = random_state(1, rng);
      const StateVector s0 = s;
      qotp_enc(q, s, 0);
      qotp_dec(q, s, 0);
      CHECK(trace_distance_pure(s, s0) < 1e-12);
    }
  }
  SUBCASE("round-trip error stays within 4/sqrt(2^k)") {
    // decryption repairs the conjugate key to a unit quaternion; the repair is
    // within 4/sqrt(2^k) of the exact inverse in operator norm, which bounds
    // the L2 state error
    for (int k : {8, 14, 20}) {
      const double bound = 4.0 / std::sqrt(std::ldexp(1.0, k));
      double worst = 0;
      for (int i = 0; i < 1000; ++i) {
        const QuatK key = qotp_keygen(k, rng);
        StateVector s = random_state(1, rng);
        const StateVector s0 = s;
        qotp_enc(key, s, 0);
        qotp_dec(key, s, 0);
        worst = std::max(worst, l2_distance(s, s0));
      }
      CHECK(worst <= bound);
      CHECK(worst > 0);  // the pad is genuinely approximate
    }
  }
}

TEST_CASE("mean pad density matrix converges to the maximally mixed state") {
  Rng rng(45);
  const long trials = 100000;
  const double bound = 5.0 / std::sqrt(double(trials));
  StateVector zero = StateVector::basis(1, 0);
  StateVector plus = zero, imag = zero;
  plus.amp = {cplx(std::sqrt(0.5), 0), cplx(std::sqrt(0.5), 0)};
  imag.amp = {cplx(std::sqrt(0.5), 0), cplx(0, std::sqrt(0.5))};
  int which = 0;
  for (const StateVector* psi : {&zero, &plus, &imag}) {
    Rng r = rng.fork(uint64_t(which++));
    const Mat2 mean = security_trial(14, *psi, trials, r);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const cplx want = i == j ? cplx(0.5, 0) : cplx(0, 0);
        CHECK(std::abs(mean.m[i][j].real() - want.real()) <= bound);
        CHECK(std::abs(mean.m[i][j].imag() - want.imag()) <= bound);
      }
  }
  SUBCASE("the one-bit pad mixes just as well") {
    Rng r = rng.fork("pauli");
    const Mat2 mean = security_trial(1, zero, trials, r);
    CHECK(std::abs(mean.m[0][0].real() - 0.5) <= bound);
    CHECK(std::abs(mean.m[1][1].real() - 0.5) <= bound);
    CHECK(std::abs(mean.m[0][1]) <= bound);
  }
  SUBCASE("the result is a pure function of the inputs") {
    Rng a(77), b(77);
    const Mat2 m1 = security_trial(8, zero, 20000, a);
    const Mat2 m2 = security_trial(8, zero, 20000, b);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(m1.m[i][j] == m2.m[i][j]);
  }
  SUBCASE("input checking") {
    CHECK_THROWS_AS((void)security_trial(8, StateVector::basis(2, 0), 10, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)security_trial(8, zero, 0, rng), std::invalid_argument);
  }
}

// ---- gates and circuit builders ----------------------------------------------------

TEST_CASE("standard gate constructors") {
  const int k = 30;
  const double tol = std::ldexp(8.0, -k);  // truncation at k bits, a few ulps
  SUBCASE("gate_h acts as the Hadamard") {
    const double r = std::sqrt(0.5);
    const Mat2 h{{{r, r}, {r, -r}}};
    CHECK(spectral_distance_up_to_phase(quat_to_matrix(unitary_approx(gate_h(k).value())), h) <
          tol);
  }
  SUBCASE("gate_rz matches the phase gate for a few angles") {
    for (double turns : {0.25, 0.125, -0.3, 0.5}) {
      Mat2 rz = Mat2::eye();
      rz.m[1][1] = std::polar(1.0, 2 * std::numbers::pi * turns);
      CHECK(spectral_distance_up_to_phase(
                quat_to_matrix(unitary_approx(gate_rz(turns, k).value())), rz) < tol);
    }
  }
  SUBCASE("gate_from_matrix round-trips arbitrary unitaries") {
    Rng rng(46);
    for (int rep = 0; rep < 100; ++rep) {
      const Quat4 t = random_unit(rng);
      const Mat2 u = quat_to_matrix(t);
      const QuatK g = gate_from_matrix(u, k);
      CHECK(spectral_distance_up_to_phase(quat_to_matrix(unitary_approx(g.value())), u) < tol);
    }
    // a global phase on the input does not change the gate's action
    Mat2 u = quat_to_matrix(random_unit(rng));
    Mat2 v = u;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) v.m[i][j] *= std::polar(1.0, 1.234);
    CHECK(spectral_distance_up_to_phase(
              quat_to_matrix(unitary_approx(gate_from_matrix(v, k).value())), u) < tol);
  }
  SUBCASE("non-unitary input is rejected") {
    Mat2 bad = Mat2::eye();
    bad.m[0][0] = 2;
    CHECK_THROWS_AS((void)gate_from_matrix(bad, k), std::invalid_argument);
  }
  SUBCASE("gate_from_euler agrees with the angle-form rotation") {
    Rng rng(47);
    for (int rep = 0; rep < 50; ++rep) {
      const double a = rng.unit_double(), b = rng.unit_double() / 2, g = rng.unit_double();
      const Mat2 u = euler_to_matrix(EulerAnglesD{a, b, g});
      CHECK(spectral_distance_up_to_phase(
                quat_to_matrix(unitary_approx(gate_from_euler(a, b, g, k).value())), u) < tol);
    }
  }
}

TEST_CASE("circuit builders pack levels and expand composite gates") {
  SUBCASE("gate-then-cnot packs into one level; a second cnot opens a new one") {
    Circuit c;
    append_1q(c, 0, gate_h(8));
    append_cnot(c, 0, 1);
    CHECK(c.levels.size() == 1);
    append_1q(c, 1, gate_h(8));  // lands in a fresh level after the CNOT layer
    CHECK(c.levels.size() == 2);
    append_cnot(c, 1, 0);
    CHECK(c.levels.size() == 2);
    append_cnot(c, 0, 1);
    CHECK(c.levels.size() == 3);
  }
  SUBCASE("swap is three CNOTs that really swap") {
    Circuit c;
    append_swap(c, 0, 1);
    CHECK(c.levels.size() == 3);
    Rng rng(48);
    StateVector s = random_state(2, rng);
    StateVector want = s;
    std::swap(want.amp[1], want.amp[2]);
    simulate_circuit(c, s);
    CHECK(l2_distance(s, want) < 1e-12);
  }
  SUBCASE("controlled phase rotation matches its 4x4 matrix") {
    const double turns = 0.25;
    Circuit c;
    append_crot(c, 0, 1, turns, 30);
    CHECK(c.levels.size() == 3);
    Rng rng(49);
    StateVector s = random_state(2, rng);
    StateVector want = s;
    want.amp[3] *= std::polar(1.0, 2 * std::numbers::pi * turns);  // both qubits set
    simulate_circuit(c, s);
    // three 30-bit gates and two exact CNOTs
    CHECK(trace_distance_pure(s, want) < 1e-7);
  }
  SUBCASE("an empty circuit is the identity") {
    Rng rng(50);
    StateVector s = random_state(2, rng);
    const StateVector s0 = s;
    simulate_circuit(Circuit{}, s);
    CHECK(same_amps(s, s0));
  }
}

TEST_CASE("three-qubit transform circuit matches the reference transform") {
  Circuit qc = qft_circuit(3, 16);
  CHECK(qc.levels.size() == 9);
  for (const auto& lv : qc.levels) CHECK(lv.cnots.size() == 1);
  StateVector in = StateVector::basis(3, 5);
  StateVector plain = in;
  simulate_circuit(qc, plain);
  // reference: the discrete Fourier transform of the amplitude vector. the only
  // circuit error is 16-bit gate truncation (12 one-qubit gates, each a couple
  // of grid steps off), well under 1e-3 in trace distance
  CHECK(trace_distance_pure(plain, dft_state(in)) <= 1e-3);
  // per-index magnitudes of a transformed basis state are flat
  for (const cplx& a : plain.amp) CHECK(std::abs(std::abs(a) - 1 / std::sqrt(8.0)) < 1e-3);
}

// ---- scheme parameters, key generation, bundles -------------------------------------

TEST_CASE("scheme keygen shapes and cost probes") {
  Rng rng(51);
  SUBCASE("slot counts follow 3kL+1") {
    auto mock = qhe_keygen_mock(16, 2, 4);
    CHECK(mock.chain.slots() == 25);
    CHECK(mock.prm.slots() == 25);
    CHECK(mock.prm.hops_per_level() == 12);
    QheKeys keys = qhe_keygen(xs_params(), 16, 1, 2, rng);
    CHECK(keys.chain.slots() == 7);
    CHECK(keys.prm.depth_budget == xs_params().eta_c);
    // a no-evaluation chain is a single key with no links
    QheKeys fresh = qhe_keygen(xs_params(), 16, 0, 8, rng);
    CHECK(fresh.chain.slots() == 1);
    CHECK(fresh.chain.links.empty());
  }
  SUBCASE("cost probes are populated and grow with k") {
    auto small = qhe_params(16, 1, 4);
    auto big = qhe_params(16, 1, 16);
    CHECK(small.mul_nands > 0);
    CHECK(small.cnot_nands > small.mul_nands);  // the conversion dwarfs one update
    CHECK(big.mul_nands > small.mul_nands);
    CHECK(big.cnot_nands > small.cnot_nands);
    CHECK(big.cnot_refreshes > 0);
  }
  SUBCASE("bad shapes are rejected") {
    CHECK_THROWS_AS((void)qhe_params(16, -1, 4), std::invalid_argument);
    CHECK_THROWS_AS((void)qhe_params(16, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)qhe_params(0, 1, 4), std::invalid_argument);
    CHECK_THROWS_AS((void)qhe_keygen(xs_params(), 16, 1, 63, rng), std::invalid_argument);
  }
  SUBCASE("the log-squared precision preset") {
    CHECK(kbits_typical(16) == 16);
    CHECK(kbits_typical(256) == 62);  // clamped to the fixed-point range
    CHECK(kbits_typical(2) == 1);
  }
}

TEST_CASE("public bundle carries keys and links but no secrets") {
  Rng rng(52);
  QheKeys keys = qhe_keygen(xs_params(), 16, 1, 1, rng);  // 4 slots, 3 links
  const std::string chain_path = "/tmp/qotp_qfhe_chain.bin";
  const std::string pub_path = "/tmp/qotp_qfhe_public.bin";
  save_keychain(chain_path, keys.chain);
  const QhePublicInfo pi = public_info(keys.chain);
  save_public_info(pub_path, pi);

  SUBCASE("round trip") {
    const QhePublicInfo back = load_public_info(pub_path);
    CHECK(back.kbits == pi.kbits);
    CHECK(back.levels == pi.levels);
    REQUIRE(back.pks.size() == pi.pks.size());
    for (size_t i = 0; i < pi.pks.size(); ++i) CHECK(back.pks[i].Aprime == pi.pks[i].Aprime);
    REQUIRE(back.links.size() == pi.links.size());
    for (size_t i = 0; i < pi.links.size(); ++i) {
      CHECK(back.links[i].sk_bits == pi.links[i].sk_bits);
      CHECK(back.links[i].trap_bits == pi.links[i].trap_bits);
    }
  }
  SUBCASE("a loaded public key still encrypts for the original secret key") {
    const QhePublicInfo back = load_public_info(pub_path);
    Rng r(53);
    for (int v : {0, 1, 1, 0}) {
      const MheCiphertext ct = mhe_enc(back.pks[0], v, r);
      CHECK(mhe_dec(keys.chain.p, keys.chain.keys[0].sk, ct) == v);
    }
  }
  SUBCASE("the published bytes never contain a slot secret") {
    const std::string chain_bytes = file_bytes(chain_path);
    const std::string pub_bytes = file_bytes(pub_path);
    for (const auto& kp : keys.chain.keys) {
      // the secret combination, in the byte form the private chain file uses
      std::string esk_needle;
      for (uint64_t b : kp.esk) esk_needle.push_back(char(b));
      // the trapdoor matrix, in the u64 form matrices are serialized in
      std::string trap_needle;
      for (size_t i = 0; i < kp.R.a.size() && i < 16; ++i) trap_needle += u64_le(kp.R.a[i]);
      // positive control: the private chain file does hold both
      CHECK(chain_bytes.find(esk_needle) != std::string::npos);
      CHECK(chain_bytes.find(trap_needle) != std::string::npos);
      // and the public bundle holds neither
      CHECK(pub_bytes.find(esk_needle) == std::string::npos);
      CHECK(pub_bytes.find(trap_needle) == std::string::npos);
    }
  }
  std::remove(chain_path.c_str());
  std::remove(pub_path.c_str());
}

// ---- encrypt / decrypt ---------------------------------------------------------------

TEST_CASE("scheme encrypt/decrypt round-trips within the pad error budget") {
  Rng rng(54);
  // per-qubit budget: pad repair at encryption, repair of the conjugate at
  // decryption, and the trace-distance cost of an L2 perturbation
  auto budget = [](int k) {
    const double e = 4.0 / std::sqrt(std::ldexp(1.0, k));
    return 2 * std::sqrt(e) + std::sqrt(2.0) * e * (std::sqrt(2.0) / 2);
  };
  SUBCASE("one qubit, mock backend") {
    MockBackend mk;
    MockKeyChain ch = keychain_gen_mock(16, 0);  // a single slot: encrypt, decrypt
    StateVector psi = random_state(1, rng);
    const StateVector orig = psi;
    auto cts = qhe_enc(mk, psi, 16, rng);
    REQUIRE(cts.size() == 1);
    CHECK(trace_distance_pure(psi, orig) > 0.01);  // the pad moved the state
    qhe_dec(mk, ch, cts, psi);
    CHECK(trace_distance_pure(psi, orig) <= budget(16));
  }
  SUBCASE("three qubits, independent keys") {
    MockBackend mk;
    MockKeyChain ch = keychain_gen_mock(16, 0);
    StateVector psi = random_state(3, rng);
    const StateVector orig = psi;
    auto cts = qhe_enc(mk, psi, 16, rng);
    REQUIRE(cts.size() == 3);
    const QuatK k0 = decrypt_quat(mk, cts[0].key);
    const QuatK k1 = decrypt_quat(mk, cts[1].key);
    const QuatK k2 = decrypt_quat(mk, cts[2].key);
    CHECK(!(k0 == k1));
    CHECK(!(k1 == k2));
    qhe_dec(mk, ch, cts, psi);
    CHECK(trace_distance_pure(psi, orig) <= 3 * budget(16));
  }
  SUBCASE("one qubit, lattice backend") {
    QheKeys keys = qhe_keygen(xs_params(), 2, 0, 8, rng);
    LatticeBackend lat(keys.chain, 0xabc);
    StateVector psi = random_state(1, rng);
    const StateVector orig = psi;
    auto cts = qhe_enc(lat, psi, 8, rng);
    qhe_dec(lat, keys.chain, cts, psi);
    // the repaired conjugate is within 4/sqrt(2^k) of the exact inverse
    CHECK(l2_distance(psi, orig) <= 4.0 / std::sqrt(std::ldexp(1.0, 8)));
  }
  SUBCASE("keys that never reached the chain tail are refused") {
    MockBackend mk;
    MockKeyChain ch = keychain_gen_mock(16, 1);  // 49 slots; fresh keys sit at 0
    StateVector psi = random_state(1, rng);
    auto cts = qhe_enc(mk, psi, 16, rng);
    CHECK_THROWS_AS(qhe_dec(mk, ch, cts, psi), std::invalid_argument);
  }
}

// ---- 1-qubit gate evaluation ----------------------------------------------------------

TEST_CASE("gate-key updates fold gates without touching the state") {
  Rng rng(55);
  SUBCASE("the identity gate leaves the key bits unchanged") {
    MockBackend mk;
    const QuatK key = qotp_keygen(16, rng);
    QotpCiphertext<MockBackend> ct{0, encrypt_quat(mk, key, 0), 0, 0};
    eval_1q(mk, ct, truncate_k(Quat4{1, 0, 0, 0}, 16));
    CHECK(decrypt_quat(mk, ct.key) == key);
    CHECK(ct.gates == 1);
  }
  SUBCASE("evaluating the pad itself decrypts to the gate applied") {
    // after folding g = key, the residual key is the truncated squared norm:
    // decryption then applies the repair of a near-identity, so the result is
    // the gate's action up to about sqrt(3 * 2^{3-k})
    const int k = 20;
    MockBackend mk;
    MockKeyChain ch = keychain_gen_mock(k, 0);
    for (int rep = 0; rep < 20; ++rep) {
      const QuatK key = qotp_keygen(k, rng);
      StateVector psi = random_state(1, rng);
      StateVector want = psi;
      apply_1q(want, 0, quat_to_matrix(unitary_approx(key.value())));
      qotp_enc(key, psi, 0);
      std::vector<QotpCiphertext<MockBackend>> cts{{0, encrypt_quat(mk, key, 0), 0, 0}};
      eval_1q(mk, cts[0], key);
      qhe_dec(mk, ch, cts, psi);
      CHECK(trace_distance_pure(psi, want) <= std::sqrt(3 * std::ldexp(8.0, -k)) + 1e-6);
    }
  }
  SUBCASE("a hundred random gates stay within the drift budget") {
    const int k = 20, m = 100;
    MockBackend mk;
    MockKeyChain ch = keychain_gen_mock(k, 0);
    const QuatK key = qotp_keygen(k, rng);
    StateVector psi = random_state(1, rng);
    StateVector oracle = psi;
    apply_1q(oracle, 0, quat_to_matrix(unitary_approx(key.value())));  // padded twin
    qotp_enc(key, psi, 0);
    const StateVector padded = psi;
    std::vector<QotpCiphertext<MockBackend>> cts{{0, encrypt_quat(mk, key, 0), 0, 0}};
    QuatK plain = key;
    for (int i = 0; i < m; ++i) {
      const QuatK g = truncate_k(random_unit(rng), k);
      eval_1q(mk, cts[0], g);
      plain = quat_mul_fixed(plain, quat_inv_fixed(g));
      apply_1q(oracle, 0, quat_to_matrix(unitary_approx(g.value())));
    }
    CHECK(cts[0].gates == m);
    // the encrypted fold is the plain fixed-point fold, bit for bit
    CHECK(decrypt_quat(mk, cts[0].key) == plain);
    // the state was never touched by the updates
    CHECK(same_amps(psi, padded));
    // error budget: pad repair at encryption sqrt(3*2^{1-k}), repair of the
    // drifted product at decryption sqrt(3*(m+1)*2^{2-k}), and 2^{1-k} of
    // truncation per fold
    const double bound = std::sqrt(3 * std::ldexp(2.0, -k)) +
                         std::sqrt(3.0 * (m + 1) * std::ldexp(4.0, -k)) +
                         2.0 * m * std::ldexp(2.0, -k);
    qhe_dec(mk, ch, cts, psi);
    CHECK(l2_distance(psi, oracle) <= bound);
  }
  SUBCASE("precision mismatch is rejected") {
    MockBackend mk;
    QotpCiphertext<MockBackend> ct{0, encrypt_quat(mk, qotp_keygen(16, rng), 0), 0, 0};
    CHECK_THROWS_AS(eval_1q(mk, ct, gate_h(8)), std::invalid_argument);
  }
  SUBCASE("the lattice backend folds the same bits") {
    Rng krng(56);
    QheKeys keys = qhe_keygen(xs_params(), 2, 0, 2, krng);
    LatticeBackend lat(keys.chain, 0xdef);
    MockBackend mk;
    const QuatK key = qotp_keygen(2, krng);
    const QuatK g = truncate_k(random_unit(krng), 2);
    QotpCiphertext<LatticeBackend> lct{0, encrypt_quat(lat, key, 0), 0, 0};
    QotpCiphertext<MockBackend> mct{0, encrypt_quat(mk, key, 0), 0, 0};
    eval_1q(lat, lct, g);
    eval_1q(mk, mct, g);
    CHECK(decrypt_quat(lat, lct.key) == decrypt_quat(mk, mct.key));
  }
}

TEST_CASE("a long chain of key updates stays within the drift budget") {
  // a thousand folds at the wide end of the fixed-point range, against a
  // double-precision twin (exact to ~1e-13 here, far below the bounds)
  const int k = 40, m = 1000;
  Rng rng(57);
  MockBackend mk;
  MockKeyChain ch = keychain_gen_mock(k, 0);
  const QuatK key = qotp_keygen(k, rng);
  StateVector psi = random_state(1, rng);
  StateVector oracle = psi;
  apply_1q(oracle, 0, quat_to_matrix(unitary_approx(key.value())));
  qotp_enc(key, psi, 0);
  std::vector<QotpCiphertext<MockBackend>> cts{{0, encrypt_quat(mk, key, 0), 0, 0}};
  Quat4 twin = key.value();
  for (int i = 0; i < m; ++i) {
    const QuatK g = truncate_k(random_unit(rng), k);
    eval_1q(mk, cts[0], g);
    twin = quat_mul(twin, quat_inv(g.value()));
    apply_1q(oracle, 0, quat_to_matrix(unitary_approx(g.value())));
  }
  // each fold truncates every component by at most 2^{-k}, and the incoming
  // error passes through unit-norm factors, so coordinates drift at most
  // m * 2^{-k} plus double-precision noise
  const Quat4 dec = decrypt_quat(mk, cts[0].key).value();
  double worst = 0;
  for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(dec[size_t(i)] - twin[size_t(i)]));
  CHECK(worst <= (m + 2) * std::ldexp(1.0, -k));
  // state-level budget, same shape as the hundred-gate case
  const double bound = std::sqrt(3 * std::ldexp(2.0, -k)) +
                       std::sqrt(3.0 * (m + 1) * std::ldexp(4.0, -k)) +
                       2.0 * m * std::ldexp(2.0, -k);
  qhe_dec(mk, ch, cts, psi);
  CHECK(l2_distance(psi, oracle) <= bound);
}

// ---- CNOT evaluation -------------------------------------------------------------------

TEST_CASE("encrypted CNOT with identity pads acts as a plain CNOT") {
  Rng rng(58);
  const int k = 2;
  const QheParams prm = qhe_params(2, 1, k);
  for (uint64_t idx : {uint64_t(0), uint64_t(1), uint64_t(2), uint64_t(3)}) {
    MockKeyChain ch = keychain_gen_mock(k, 1);  // 7 slots
    MockBackend mk;
    MockRotEnv env{mk, ch, reg_keypair()};
    StateVector psi = StateVector::basis(2, idx);
    StateVector want = psi;
    apply_cnot(want, 0, 1);
    const QuatK id = truncate_k(Quat4{1, 0, 0, 0}, k);
    StateVector enc = psi;
    qotp_enc(id, enc, 0);
    qotp_enc(id, enc, 1);
    std::vector<QotpCiphertext<MockBackend>> cts{{0, encrypt_quat(mk, id, 0), 0, 0},
                                                 {1, encrypt_quat(mk, id, 0), 0, 0}};
    eval_cnot(env, enc, cts[0], cts[1], prm, SimMode::Idealized, rng);
    CHECK(cts[0].slot == 6);
    CHECK(cts[1].slot == 6);
    qhe_dec(mk, ch, cts, enc);
    REQUIRE(trace_distance_pure(enc, want) <= 1e-10);
  }
}

TEST_CASE("encrypted CNOT commutes with decryption for every Pauli pad pair") {
  // CNOT (X^{a1} Z^{b1} ox X^{a2} Z^{b2}) = (X^{a1} Z^{b1^b2} ox X^{a1^a2} Z^{b2}) CNOT,
  // so evaluating on pad-encrypted qubits and decrypting with the migrated keys
  // must equal a plain CNOT. Pads are exact Paulis here, their canonical angles
  // are exact two-bit fractions, so the only error is floating-point noise.
  Rng rng(59);
  const int k = 2;
  const QheParams prm = qhe_params(2, 1, k);
  for (int a1 : {0, 1})
    for (int b1 : {0, 1})
      for (int a2 : {0, 1})
        for (int b2 : {0, 1}) {
          const QuatK t1 = truncate_k(pauli_embed(b1, a1), k);  // X^a Z^b = +-Z^b X^a
          const QuatK t2 = truncate_k(pauli_embed(b2, a2), k);
          double worst = 0;
          for (int rep = 0; rep < 100; ++rep) {
            MockKeyChain ch = keychain_gen_mock(k, 1);
            MockBackend mk;
            MockRotEnv env{mk, ch, reg_keypair()};
            StateVector psi = random_state(2, rng);
            StateVector want = psi;
            apply_cnot(want, 0, 1);
            StateVector enc = psi;
            qotp_enc(t1, enc, 0);
            qotp_enc(t2, enc, 1);
            std::vector<QotpCiphertext<MockBackend>> cts{{0, encrypt_quat(mk, t1, 0), 0, 0},
                                                         {1, encrypt_quat(mk, t2, 0), 0, 0}};
            eval_cnot(env, enc, cts[0], cts[1], prm, SimMode::Idealized, rng);
            qhe_dec(mk, ch, cts, enc);
            worst = std::max(worst, trace_distance_pure(enc, want));
          }
          REQUIRE(worst <= 1e-10);
        }
}

TEST_CASE("encrypted CNOT on fresh random pads makes the Bell state") {
  Rng rng(60);
  const int k = 16;
  auto keys = qhe_keygen_mock(16, 1, k);
  MockBackend mk;
  MockRotEnv env{mk, keys.chain, reg_keypair()};
  // |+>|0>
  StateVector psi = StateVector::basis(2, 0);
  psi.amp[0] = psi.amp[1] = std::sqrt(0.5);
  StateVector want = psi;
  apply_cnot(want, 0, 1);
  auto cts = qhe_enc(mk, psi, k, rng);
  eval_cnot(env, psi, cts[0], cts[1], keys.prm, SimMode::Idealized, rng);
  CHECK(cts[0].slot == keys.chain.slots() - 1);
  CHECK(cts[0].gates == 0);  // the migrated pad is exact again
  // the migrated keys are exact Pauli embeds
  for (const auto& ct : cts) {
    const QuatK q = decrypt_quat(mk, ct.key);
    int units = 0;
    for (int i = 0; i < 4; ++i) {
      const int64_t num = q.c[size_t(i)].num;
      if (num != 0) {
        ++units;
        CHECK(std::llabs(num) == (int64_t(1) << k));
        if (num < 0) CHECK(i == 3);  // only the -x1*x2 component may be negative
      }
    }
    CHECK(units == 1);
  }
  qhe_dec(mk, keys.chain, cts, psi);
  // conversion of two random 16-bit keys rounds six angles to 16 bits
  CHECK(trace_distance_pure(psi, want) <= 1e-3);
}

TEST_CASE("encrypted CNOT input checking") {
  Rng rng(61);
  const int k = 2;
  const QheParams prm = qhe_params(2, 1, k);
  MockBackend mk;
  const QuatK id = truncate_k(Quat4{1, 0, 0, 0}, k);
  SUBCASE("slot exhaustion is detected before the state is touched") {
    MockKeyChain ch = keychain_gen_mock(k, 0);  // a single slot: no window at all
    MockRotEnv env{mk, ch, reg_keypair()};
    StateVector psi = random_state(2, rng);
    const StateVector before = psi;
    QotpCiphertext<MockBackend> c1{0, encrypt_quat(mk, id, 0), 0, 0};
    QotpCiphertext<MockBackend> c2{1, encrypt_quat(mk, id, 0), 0, 0};
    CHECK_THROWS_AS(eval_cnot(env, psi, c1, c2, prm, SimMode::Idealized, rng), std::out_of_range);
    CHECK(same_amps(psi, before));
  }
  MockKeyChain ch = keychain_gen_mock(k, 1);
  MockRotEnv env{mk, ch, reg_keypair()};
  StateVector psi = random_state(2, rng);
  SUBCASE("control must differ from target") {
    QotpCiphertext<MockBackend> c1{1, encrypt_quat(mk, id, 0), 0, 0};
    QotpCiphertext<MockBackend> c2{1, encrypt_quat(mk, id, 0), 0, 0};
    CHECK_THROWS_AS(eval_cnot(env, psi, c1, c2, prm, SimMode::Idealized, rng),
                    std::invalid_argument);
  }
  SUBCASE("keys must start at the same slot") {
    QotpCiphertext<MockBackend> c1{0, encrypt_quat(mk, id, 0), 1, 0};
    QotpCiphertext<MockBackend> c2{1, encrypt_quat(mk, id, 0), 0, 0};
    CHECK_THROWS_AS(eval_cnot(env, psi, c1, c2, prm, SimMode::Idealized, rng),
                    std::invalid_argument);
  }
  SUBCASE("key precision must match the parameters") {
    QotpCiphertext<MockBackend> c1{0, encrypt_quat(mk, truncate_k(Quat4{1, 0, 0, 0}, 4), 0), 0, 0};
    QotpCiphertext<MockBackend> c2{1, encrypt_quat(mk, id, 0), 0, 0};
    CHECK_THROWS_AS(eval_cnot(env, psi, c1, c2, prm, SimMode::Idealized, rng),
                    std::invalid_argument);
  }
}

// ---- whole-circuit evaluation ------------------------------------------------------------

TEST_CASE("a level of 1-qubit gates evaluates to the plain fixed-point fold") {
  Rng rng(62);
  const int k = 8;
  auto keys = qhe_keygen_mock(8, 1, k);
  MockBackend mk;
  MockRotEnv env{mk, keys.chain, reg_keypair()};
  StateVector psi = random_state(2, rng);
  auto cts = qhe_enc(mk, psi, k, rng);
  const StateVector padded = psi;
  std::vector<QuatK> plain{decrypt_quat(mk, cts[0].key), decrypt_quat(mk, cts[1].key)};
  Circuit c;
  for (int i = 0; i < 5; ++i) {
    const int q = int(rng.below(2));
    const QuatK g = truncate_k(random_unit(rng), k);
    append_1q(c, q, g);
    plain[size_t(q)] = quat_mul_fixed(plain[size_t(q)], quat_inv_fixed(g));
  }
  eval_circuit(env, psi, cts, c, keys.prm, SimMode::Idealized, rng);
  // gates never touch the state; the level only forwarded the keys
  CHECK(same_amps(psi, padded));
  CHECK(cts[0].slot == keys.chain.slots() - 1);
  CHECK(decrypt_quat(mk, cts[0].key) == plain[0]);
  CHECK(decrypt_quat(mk, cts[1].key) == plain[1]);
  StateVector twin = padded;
  qhe_dec(mk, keys.chain, cts, psi);
  // decrypting with the same keys through the plain path gives the same state
  qotp_dec(plain[0], twin, 0);
  qotp_dec(plain[1], twin, 1);
  CHECK(same_amps(psi, twin));
}

TEST_CASE("circuit evaluation input checking") {
  Rng rng(63);
  const int k = 2;
  auto keys = qhe_keygen_mock(2, 1, k);
  MockBackend mk;
  MockRotEnv env{mk, keys.chain, reg_keypair()};
  StateVector psi = random_state(2, rng);
  auto cts = qhe_enc(mk, psi, k, rng);
  SUBCASE("too many levels") {
    Circuit c;
    append_cnot(c, 0, 1);
    append_cnot(c, 0, 1);
    CHECK(c.levels.size() == 2);
    CHECK_THROWS_AS(eval_circuit(env, psi, cts, c, keys.prm, SimMode::Idealized, rng),
                    std::invalid_argument);
  }
  SUBCASE("a gate on an unknown qubit") {
    Circuit c;
    append_1q(c, 7, truncate_k(Quat4{1, 0, 0, 0}, k));
    CHECK_THROWS_AS(eval_circuit(env, psi, cts, c, keys.prm, SimMode::Idealized, rng),
                    std::invalid_argument);
  }
  SUBCASE("an overlapping CNOT layer") {
    Circuit c;
    append_cnot(c, 0, 1);
    c.levels[0].cnots.push_back({1, 0});  // same qubits again in one layer
    CHECK_THROWS_AS(eval_circuit(env, psi, cts, c, keys.prm, SimMode::Idealized, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("end-to-end: three-qubit transform evaluated under encryption") {
  Rng rng(64);
  const int k = 16;
  Circuit qc = qft_circuit(3, k);
  auto keys = qhe_keygen_mock(16, int(qc.levels.size()), k);
  REQUIRE(keys.chain.slots() == 3 * k * int(qc.levels.size()) + 1);
  MockBackend mk;
  MockRotEnv env{mk, keys.chain, reg_keypair()};
  StateVector psi = StateVector::basis(3, 5);
  const StateVector want = dft_state(psi);
  auto cts = qhe_enc(mk, psi, k, rng);
  eval_circuit(env, psi, cts, qc, keys.prm, SimMode::Idealized, rng);
  for (const auto& ct : cts) CHECK(ct.slot == keys.chain.slots() - 1);
  qhe_dec(mk, keys.chain, cts, psi);
  CHECK(trace_distance_pure(psi, want) <= 1e-3);
}

TEST_CASE("end-to-end: Bell pair through the circuit evaluator") {
  Rng rng(65);
  const int k = 16;
  Circuit c;
  append_1q(c, 0, gate_h(k));
  append_cnot(c, 0, 1);
  auto keys = qhe_keygen_mock(16, 1, k);
  MockBackend mk;
  MockRotEnv env{mk, keys.chain, reg_keypair()};
  StateVector psi = StateVector::basis(2, 0);
  auto cts = qhe_enc(mk, psi, k, rng);
  eval_circuit(env, psi, cts, c, keys.prm, SimMode::Idealized, rng);
  qhe_dec(mk, keys.chain, cts, psi);
  StateVector bell = StateVector::basis(2, 0);
  bell.amp[0] = bell.amp[3] = std::sqrt(0.5);
  CHECK(trace_distance_pure(psi, bell) <= 1e-3);
}

// ---- ciphertext bundles --------------------------------------------------------------------

TEST_CASE("ciphertext bundles round-trip on both backends") {
  Rng rng(66);
  SUBCASE("mock bundle with a state dump") {
    MockBackend mk;
    StateVector psi = random_state(2, rng);
    auto cts = qhe_enc(mk, psi, 16, rng);
    cts[1].slot = 3;
    cts[1].gates = 7;
    const std::string path = "/tmp/qotp_qfhe_mock_bundle.bin";
    save_ciphertexts_mock(path, cts, &psi);
    StateVector back_state = StateVector::basis(1, 0);
    auto back = load_ciphertexts_mock(path, &back_state);
    REQUIRE(back.size() == cts.size());
    for (size_t i = 0; i < cts.size(); ++i) {
      CHECK(back[i].qubit == cts[i].qubit);
      CHECK(back[i].slot == cts[i].slot);
      CHECK(back[i].gates == cts[i].gates);
      CHECK(decrypt_quat(mk, back[i].key) == decrypt_quat(mk, cts[i].key));
    }
    CHECK(same_amps(back_state, psi));
    // a load that does not ask for the dump skips it cleanly
    auto again = load_ciphertexts_mock(path);
    CHECK(again.size() == cts.size());
    std::remove(path.c_str());
  }
  SUBCASE("lattice bundle") {
    Rng krng(67);
    QheKeys keys = qhe_keygen(xs_params(), 2, 0, 2, krng);
    LatticeBackend lat(keys.chain, 0x222);
    StateVector psi = random_state(1, rng);
    auto cts = qhe_enc(lat, psi, 2, rng);
    const std::string path = "/tmp/qotp_qfhe_lat_bundle.bin";
    save_ciphertexts(path, xs_params(), cts);
    auto back = load_ciphertexts(path, xs_params());
    REQUIRE(back.size() == 1);
    CHECK(decrypt_quat(lat, back[0].key) == decrypt_quat(lat, cts[0].key));
    // a bundle with no dump refuses to produce one
    StateVector sink = StateVector::basis(1, 0);
    CHECK_THROWS_AS((void)load_ciphertexts(path, xs_params(), &sink), std::runtime_error);
    // and the params hash is enforced
    CHECK_THROWS_AS((void)load_ciphertexts(path, reg_params(1)), std::runtime_error);
    std::remove(path.c_str());
  }
  SUBCASE("backend tag mismatch is rejected") {
    MockBackend mk;
    StateVector psi = random_state(1, rng);
    auto cts = qhe_enc(mk, psi, 2, rng);
    const std::string path = "/tmp/qotp_qfhe_tag_bundle.bin";
    save_ciphertexts_mock(path, cts);
    CHECK_THROWS_AS((void)load_ciphertexts(path, xs_params()), std::runtime_error);
    std::remove(path.c_str());
  }
}
