#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qotp/rng.hpp"

namespace qotp {

// GSW-style homomorphic encryption over Z_q with a gadget trapdoor, plus the
// companion "alternative" vector scheme reachable through Convert. q is a
// power of two throughout, so modular reduction is a mask and the centered
// representative range is (-q/2, q/2].

struct LweParams {
  std::string name;
  int lambda = 2;
  int n = 4;        // secret dimension
  int mbar = 2;     // rows above the gadget block
  int wb = 7;       // digits per secret coordinate in the trapdoor gadget
  int blog = 8;     // log2 of the trapdoor gadget base
  uint64_t beta_init = 4;
  int eta_c = 3;    // classical depth budget
  int eta = 1;      // CNOT precision exponent
  int ct = 0;       // inversion constant C_T (calibrated per preset)

  // derived
  int m = 0, logq = 0, N = 0;
  uint64_t q = 0, beta_f = 0;

  uint64_t mask() const { return q - 1; }
  uint64_t beta_c() const;  // beta_init * (N+1)^eta_c
  int64_t centered(uint64_t x) const {
    return x <= q / 2 ? int64_t(x) : int64_t(x) - int64_t(q);
  }
};

enum class Preset { toy_s, toy_m, paper_shaped };

// Fills the derived fields and checks every constraint the parameters must
// satisfy (q a power of two > 4(m+1)beta_f, beta_init >= 2 sqrt n, widths
// sane). Throws std::invalid_argument when unsatisfiable.
LweParams make_params(std::string name, int lambda, int n, int mbar, int wb, int blog,
                      uint64_t beta_init, int eta_c, int eta);
LweParams gen_params(Preset p);

std::string params_to_text(const LweParams& p);
LweParams params_from_text(const std::string& text);

// Truncated discrete Gaussian on [-B, B] with density proportional to
// exp(-pi x^2 / B^2). Exact CDF-table sampling for moderate B, rounded
// rejection sampling for large B (the two agree to far below test power).
int64_t sample_gaussian(uint64_t B, uint64_t q, Rng& rng);
std::vector<int64_t> sample_gaussian_vec(int len, uint64_t B, uint64_t q, Rng& rng);

struct Mat {
  int rows = 0, cols = 0;
  std::vector<uint64_t> a;
  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(size_t(r) * size_t(c), 0) {}
  uint64_t& at(int r, int c) { return a[size_t(r) * cols + c]; }
  uint64_t at(int r, int c) const { return a[size_t(r) * cols + c]; }
  friend bool operator==(const Mat&, const Mat&) = default;
};

struct MhePublicKey {
  LweParams p;
  Mat Aprime;  // (m+1) x n
};

struct TrapdoorKeypair {
  MhePublicKey pk;
  Mat A;                      // m x n, top mbar rows uniform, rest R^T*Abar + gadget
  Mat R;                      // trapdoor bits, mbar x (n*wb)
  std::vector<uint64_t> esk;  // m bits
  std::vector<uint64_t> sk;   // (-esk, 1) mod q, length m+1
};

TrapdoorKeypair gen_trap(const LweParams& p, Rng& rng);

// Recover (s, e) from A s + e. Reports failure (nullopt) when the recovered
// error fails the norm bound ||e||_2 <= q / (ct * sqrt(n log q)); callers get
// either a verified preimage or an explicit refusal, never a silent garbage s.
std::optional<std::pair<std::vector<uint64_t>, std::vector<int64_t>>> invert(
    const TrapdoorKeypair& kp, const std::vector<uint64_t>& c);

struct MheCiphertext {
  Mat C;          // (m+1) x N
  int depth = 0;  // NAND depth since fresh; decryption guaranteed while <= eta_c
  friend bool operator==(const MheCiphertext&, const MheCiphertext&) = default;
};

struct AltCiphertext {
  std::vector<uint64_t> c;  // length m+1
  friend bool operator==(const AltCiphertext&, const AltCiphertext&) = default;
};

// Openings let tests decompose ciphertexts with known randomness.
struct MheOpening {
  Mat S;  // n x N
  Mat E;  // (m+1) x N, entries stored centered+q
};
struct AltOpening {
  std::vector<uint64_t> s;
  std::vector<int64_t> e;
};

MheCiphertext mhe_enc(const MhePublicKey& pk, int mu, Rng& rng, MheOpening* opening = nullptr);
int mhe_dec(const LweParams& p, const std::vector<uint64_t>& sk, const MheCiphertext& C);
MheCiphertext mhe_eval_nand(const LweParams& p, const MheCiphertext& C0, const MheCiphertext& C1);
// exact complement (noise negated, depth unchanged)
MheCiphertext mhe_not(const LweParams& p, const MheCiphertext& C);
AltCiphertext mhe_convert(const LweParams& p, const MheCiphertext& C);

// B = 0 means the scheme's fresh-noise level beta_init; the conditional
// rotation protocol passes beta_f.
AltCiphertext alt_enc(const MhePublicKey& pk, int mu, Rng& rng, uint64_t B = 0,
                      AltOpening* opening = nullptr);
// Fixed-randomness form: A's + e with mu*(q/2) on the last coordinate. The
// rotation protocol reconstructs both measurement preimages with it.
AltCiphertext alt_encode(const MhePublicKey& pk, int mu, const std::vector<uint64_t>& s,
                         const std::vector<int64_t>& e);
int alt_dec(const LweParams& p, const std::vector<uint64_t>& sk, const AltCiphertext& c);
AltCiphertext alt_xor(const LweParams& p, const AltCiphertext& c1, const AltCiphertext& c2);
AltCiphertext alt_not(const LweParams& p, const AltCiphertext& c);

// Trapdoor decryption of an alternative ciphertext: recovers the plaintext
// and the full randomness (s, e). Fails like invert.
struct AltRecovery {
  int mu = 0;
  std::vector<uint64_t> s;
  std::vector<int64_t> e;  // length m+1
};
std::optional<AltRecovery> alt_recover(const TrapdoorKeypair& kp, const AltCiphertext& c);

}  // namespace qotp
