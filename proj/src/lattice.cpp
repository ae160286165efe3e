#include "qotp/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace qotp {

uint64_t LweParams::beta_c() const {
  unsigned __int128 v = beta_init;
  for (int i = 0; i < eta_c; ++i) v *= uint64_t(N) + 1;
  return uint64_t(v);
}

LweParams make_params(std::string name, int lambda, int n, int mbar, int wb, int blog,
                      uint64_t beta_init, int eta_c, int eta) {
  LweParams p;
  p.name = std::move(name);
  p.lambda = lambda;
  p.n = n;
  p.mbar = mbar;
  p.wb = wb;
  p.blog = blog;
  p.beta_init = beta_init;
  p.eta_c = eta_c;
  p.eta = eta;

  if (n < 1 || mbar < 1 || wb < 1 || blog < 1 || lambda < 1)
    throw std::invalid_argument("lwe params: dimensions must be positive");
  if (eta_c < 1 || eta < 1)
    throw std::invalid_argument("lwe params: depth budgets must be positive");
  p.logq = wb * blog;
  if (p.logq > 62)
    throw std::invalid_argument("lwe params: q exceeds the 62-bit arithmetic headroom");
  p.q = uint64_t(1) << p.logq;
  p.m = mbar + n * wb;
  p.N = (p.m + 1) * p.logq;
  if (beta_init * beta_init < uint64_t(4 * n))
    throw std::invalid_argument("lwe params: fresh noise width below 2 sqrt(n)");
  if (beta_init > p.q / 2)
    throw std::invalid_argument("lwe params: fresh noise width exceeds q/2");

  // final noise bound beta_f = beta_init * (N+1)^(eta + eta_c), and the
  // correctness constraint q > 4 (m+1) beta_f
  unsigned __int128 bf = beta_init;
  for (int i = 0; i < eta + eta_c; ++i) {
    bf *= uint64_t(p.N) + 1;
    if (bf > (unsigned __int128)1 << 120)
      throw std::invalid_argument("lwe params: noise bound overflows");
  }
  if ((unsigned __int128)4 * (p.m + 1) * bf >= p.q)
    throw std::invalid_argument("lwe params: q too small for 4(m+1)beta_f");
  p.beta_f = uint64_t(bf);

  if (p.ct == 0) {
    // default inversion constant: the digit-decode tolerance q/(2b) must cover
    // (1+mbar) * ||e||_inf, expressed in the q / (ct sqrt(n log q)) form
    double exact = 2.0 * double(uint64_t(1) << blog) * (1 + mbar) / std::sqrt(double(n) * p.logq);
    p.ct = int(std::ceil(exact));
  }
  return p;
}

LweParams gen_params(Preset preset) {
  switch (preset) {
    case Preset::toy_s:
      return make_params("toy_s", 2, 4, 2, 7, 8, 4, 3, 1);
    case Preset::toy_m:
      return make_params("toy_m", 2, 4, 4, 6, 10, 4, 3, 1);
    case Preset::paper_shaped:
      // lambda = 4 and both depth budgets at ceil(log2 lambda)
      return make_params("paper_shaped", 4, 4, 2, 7, 8, 4, 2, 2);
  }
  throw std::invalid_argument("unknown preset");
}

std::string params_to_text(const LweParams& p) {
  std::ostringstream os;
  os << "name=" << p.name << "\n"
     << "lambda=" << p.lambda << "\n"
     << "n=" << p.n << "\n"
     << "mbar=" << p.mbar << "\n"
     << "wb=" << p.wb << "\n"
     << "blog=" << p.blog << "\n"
     << "beta_init=" << p.beta_init << "\n"
     << "eta_c=" << p.eta_c << "\n"
     << "eta=" << p.eta << "\n"
     << "ct=" << p.ct << "\n";
  os << "# derived: m=" << p.m << " logq=" << p.logq << " N=" << p.N
     << " q=2^" << p.logq << " beta_f=" << p.beta_f << "\n";
  return os.str();
}

LweParams params_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("params text: expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto geti = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::invalid_argument("params text: missing key " + k);
    return std::stoll(it->second);
  };
  auto it = kv.find("name");
  if (it == kv.end()) throw std::invalid_argument("params text: missing key name");
  for (auto& [k, v] : kv)
    if (k != "name" && k != "lambda" && k != "n" && k != "mbar" && k != "wb" && k != "blog" &&
        k != "beta_init" && k != "eta_c" && k != "eta" && k != "ct")
      throw std::invalid_argument("params text: unknown key " + k);
  LweParams p = make_params(it->second, int(geti("lambda")), int(geti("n")), int(geti("mbar")),
                            int(geti("wb")), int(geti("blog")), uint64_t(geti("beta_init")),
                            int(geti("eta_c")), int(geti("eta")));
  int ct = int(geti("ct"));
  if (ct < p.ct)
    throw std::invalid_argument("params text: ct below the decode-tolerance minimum");
  p.ct = ct;
  return p;
}

// ---- discrete Gaussian ----

namespace {

// CDF table for one width: cum[k-1] = sum_{j=1..k} exp(-pi j^2/B^2), plus the
// weight of 0 stored separately by the caller convention below.
struct GaussTable {
  double w0 = 1.0;
  std::vector<double> cum;  // strictly increasing, size B
};

const GaussTable& gauss_table(uint64_t B) {
  static std::map<uint64_t, GaussTable> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(B);
  if (it != cache.end()) return it->second;
  GaussTable t;
  t.cum.resize(size_t(B));
  double acc = 0.0;
  for (uint64_t k = 1; k <= B; ++k) {
    double x = double(k) / double(B);
    acc += std::exp(-3.14159265358979323846 * x * x);
    t.cum[size_t(k - 1)] = acc;
  }
  return cache.emplace(B, std::move(t)).first->second;
}

}  // namespace

int64_t sample_gaussian(uint64_t B, uint64_t q, Rng& rng) {
  if (B < 1 || B > q / 2)
    throw std::invalid_argument("sample_gaussian: width must satisfy 1 <= B <= q/2");
  if (B <= (uint64_t(1) << 20)) {
    const GaussTable& t = gauss_table(B);
    double total = t.w0 + 2.0 * t.cum.back();
    double u = rng.unit_double() * total;
    if (u < t.w0) return 0;
    double v = (u - t.w0) / 2.0;
    auto it = std::upper_bound(t.cum.begin(), t.cum.end(), v);
    int64_t k = (it == t.cum.end()) ? int64_t(B) : int64_t(it - t.cum.begin()) + 1;
    return rng.next_bit() ? k : -k;
  }
  // Large widths: round a continuous Gaussian of matching density and reject
  // the (~1.2%) tail beyond B.
  double sigma = double(B) / std::sqrt(2.0 * 3.14159265358979323846);
  for (;;) {
    double x = rng.normal() * sigma;
    if (std::abs(x) <= double(B)) return int64_t(std::llround(x));
  }
}

std::vector<int64_t> sample_gaussian_vec(int len, uint64_t B, uint64_t q, Rng& rng) {
  std::vector<int64_t> v(size_t(len), 0);
  for (auto& x : v) x = sample_gaussian(B, q, rng);
  return v;
}

// ---- trapdoor keys ----

TrapdoorKeypair gen_trap(const LweParams& p, Rng& rng) {
  TrapdoorKeypair kp;
  kp.pk.p = p;
  const uint64_t mask = p.mask();
  const int gw = p.n * p.wb;  // gadget rows

  Mat Abar(p.mbar, p.n);
  for (auto& x : Abar.a) x = rng.next_u64() & mask;

  // trapdoor bits; an all-zero column would leave that row of A non-uniform
  kp.R = Mat(p.mbar, gw);
  for (int j = 0; j < gw; ++j) {
    for (;;) {
      uint64_t any = 0;
      for (int i = 0; i < p.mbar; ++i) {
        uint64_t b = uint64_t(rng.next_bit());
        kp.R.at(i, j) = b;
        any |= b;
      }
      if (any) break;
    }
  }

  kp.A = Mat(p.m, p.n);
  for (int i = 0; i < p.mbar; ++i)
    for (int c = 0; c < p.n; ++c) kp.A.at(i, c) = Abar.at(i, c);
  for (int j = 0; j < gw; ++j) {
    int block = j / p.wb, pw = j % p.wb;
    for (int c = 0; c < p.n; ++c) {
      uint64_t acc = 0;
      for (int i = 0; i < p.mbar; ++i)
        if (kp.R.at(i, j)) acc += Abar.at(i, c);
      if (c == block) acc += uint64_t(1) << (p.blog * pw);
      kp.A.at(p.mbar + j, c) = acc & mask;
    }
  }

  kp.esk.resize(size_t(p.m));
  for (auto& b : kp.esk) b = uint64_t(rng.next_bit());

  kp.pk.Aprime = Mat(p.m + 1, p.n);
  for (int i = 0; i < p.m; ++i)
    for (int c = 0; c < p.n; ++c) kp.pk.Aprime.at(i, c) = kp.A.at(i, c);
  for (int c = 0; c < p.n; ++c) {
    uint64_t acc = 0;
    for (int i = 0; i < p.m; ++i)
      if (kp.esk[size_t(i)]) acc += kp.A.at(i, c);
    kp.pk.Aprime.at(p.m, c) = acc & mask;
  }

  kp.sk.resize(size_t(p.m + 1));
  for (int i = 0; i < p.m; ++i) kp.sk[size_t(i)] = (-kp.esk[size_t(i)]) & mask;
  kp.sk[size_t(p.m)] = 1;
  return kp;
}

std::optional<std::pair<std::vector<uint64_t>, std::vector<int64_t>>> invert(
    const TrapdoorKeypair& kp, const std::vector<uint64_t>& c) {
  const LweParams& p = kp.pk.p;
  if (int(c.size()) != p.m) throw std::invalid_argument("invert: vector length != m");
  const uint64_t mask = p.mask();
  const int gw = p.n * p.wb;
  const int64_t b = int64_t(1) << p.blog;
  const int shift = p.blog * (p.wb - 1);

  // u = c_bottom - R^T c_top = gadget * s + (e_bottom - R^T e_top)
  std::vector<uint64_t> u(size_t(gw), 0);
  for (int j = 0; j < gw; ++j) {
    uint64_t acc = c[size_t(p.mbar + j)];
    for (int i = 0; i < p.mbar; ++i)
      if (kp.R.at(i, j)) acc -= c[size_t(i)];
    u[size_t(j)] = acc & mask;
  }

  // digit-by-digit decode, most significant gadget row first: once the low
  // digits of s_i are known, row (wb-1-t) isolates digit t scaled by b^(wb-1)
  std::vector<uint64_t> s(size_t(p.n), 0);
  for (int i = 0; i < p.n; ++i) {
    uint64_t slow = 0;
    for (int t = 0; t < p.wb; ++t) {
      int row = p.wb - 1 - t;
      uint64_t expect = (uint64_t(1) << (p.blog * row)) * slow;
      int64_t r = p.centered((u[size_t(i * p.wb + row)] - expect) & mask);
      int64_t d = (r + (int64_t(1) << (shift - 1))) >> shift;
      d = ((d % b) + b) % b;
      slow += uint64_t(d) << (p.blog * t);
    }
    s[size_t(i)] = slow & mask;
  }

  std::vector<int64_t> e(size_t(p.m), 0);
  long double norm2 = 0.0L;
  for (int i = 0; i < p.m; ++i) {
    uint64_t acc = c[size_t(i)];
    for (int k = 0; k < p.n; ++k) acc -= kp.A.at(i, k) * s[size_t(k)];
    e[size_t(i)] = p.centered(acc & mask);
    norm2 += (long double)e[size_t(i)] * e[size_t(i)];
  }
  long double bound = (long double)p.q / ((long double)p.ct * sqrtl((long double)p.n * p.logq));
  if (norm2 > bound * bound) return std::nullopt;
  return std::make_pair(std::move(s), std::move(e));
}

// ---- GSW scheme ----

namespace {

// gadget matrix column j has 2^(j mod logq) in row (j / logq)
inline uint64_t gadget_entry(const LweParams& p, int row, int col) {
  return (col / p.logq == row) ? uint64_t(1) << (col % p.logq) : 0;
}

}  // namespace

MheCiphertext mhe_enc(const MhePublicKey& pk, int mu, Rng& rng, MheOpening* opening) {
  const LweParams& p = pk.p;
  const uint64_t mask = p.mask();
  Mat S(p.n, p.N);
  for (auto& x : S.a) x = rng.next_u64() & mask;
  Mat E(p.m + 1, p.N);
  for (auto& x : E.a) x = uint64_t(sample_gaussian(p.beta_init, p.q, rng)) & mask;

  MheCiphertext out;
  out.C = Mat(p.m + 1, p.N);
  out.depth = 0;
  for (int i = 0; i <= p.m; ++i)
    for (int j = 0; j < p.N; ++j) {
      uint64_t acc = E.at(i, j);
      for (int k = 0; k < p.n; ++k) acc += pk.Aprime.at(i, k) * S.at(k, j);
      if (mu & 1) acc += gadget_entry(p, i, j);
      out.C.at(i, j) = acc & mask;
    }
  if (opening) {
    opening->S = std::move(S);
    opening->E = std::move(E);
  }
  return out;
}

int mhe_dec(const LweParams& p, const std::vector<uint64_t>& sk, const MheCiphertext& C) {
  const uint64_t mask = p.mask();
  uint64_t acc = 0;
  for (int i = 0; i <= p.m; ++i) acc += sk[size_t(i)] * C.C.at(i, p.N - 1);
  int64_t v = p.centered(acc & mask);
  uint64_t d0 = uint64_t(v < 0 ? -v : v);
  uint64_t d1 = p.q / 2 - d0;
  return d1 < d0 ? 1 : 0;
}

MheCiphertext mhe_eval_nand(const LweParams& p, const MheCiphertext& C0, const MheCiphertext& C1) {
  const uint64_t mask = p.mask();
  const int rows = p.m + 1;
  // transpose C0 so the per-column accumulation walks contiguous memory
  std::vector<uint64_t> c0t(size_t(p.N) * size_t(rows));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < p.N; ++j) c0t[size_t(j) * rows + i] = C0.C.at(i, j);

  MheCiphertext out;
  out.C = Mat(rows, p.N);
  out.depth = std::max(C0.depth, C1.depth) + 1;
  std::vector<uint64_t> acc(size_t(rows), 0);
  for (int j = 0; j < p.N; ++j) {
    for (int i = 0; i < rows; ++i) acc[size_t(i)] = gadget_entry(p, i, j);
    // subtract C0 * bit-decomposition of C1's column j
    for (int i2 = 0; i2 < rows; ++i2) {
      uint64_t w = C1.C.at(i2, j);
      while (w) {
        int t = __builtin_ctzll(w);
        w &= w - 1;
        const uint64_t* row = &c0t[size_t(i2 * p.logq + t) * rows];
        for (int i = 0; i < rows; ++i) acc[size_t(i)] -= row[i];
      }
    }
    for (int i = 0; i < rows; ++i) out.C.at(i, j) = acc[size_t(i)] & mask;
  }
  return out;
}

MheCiphertext mhe_not(const LweParams& p, const MheCiphertext& C) {
  // G - C encrypts the complement with the noise negated, so this is exact:
  // no growth, depth carries over unchanged.
  const uint64_t mask = p.mask();
  MheCiphertext out;
  out.C = Mat(p.m + 1, p.N);
  out.depth = C.depth;
  for (int i = 0; i <= p.m; ++i)
    for (int j = 0; j < p.N; ++j)
      out.C.at(i, j) = (gadget_entry(p, i, j) - C.C.at(i, j)) & mask;
  return out;
}

AltCiphertext mhe_convert(const LweParams& p, const MheCiphertext& C) {
  AltCiphertext out;
  out.c.resize(size_t(p.m + 1));
  for (int i = 0; i <= p.m; ++i) out.c[size_t(i)] = C.C.at(i, p.N - 1);
  return out;
}

// ---- alternative (vector) scheme ----

AltCiphertext alt_enc(const MhePublicKey& pk, int mu, Rng& rng, uint64_t B, AltOpening* opening) {
  const LweParams& p = pk.p;
  if (B == 0) B = p.beta_init;
  std::vector<uint64_t> s(size_t(p.n), 0);
  for (auto& x : s) x = rng.next_u64() & p.mask();
  std::vector<int64_t> e = sample_gaussian_vec(p.m + 1, B, p.q, rng);

  AltCiphertext out = alt_encode(pk, mu, s, e);
  if (opening) {
    opening->s = std::move(s);
    opening->e = std::move(e);
  }
  return out;
}

AltCiphertext alt_encode(const MhePublicKey& pk, int mu, const std::vector<uint64_t>& s,
                         const std::vector<int64_t>& e) {
  const LweParams& p = pk.p;
  const uint64_t mask = p.mask();
  AltCiphertext out;
  out.c.resize(size_t(p.m + 1));
  for (int i = 0; i <= p.m; ++i) {
    uint64_t acc = uint64_t(e[size_t(i)]);
    for (int k = 0; k < p.n; ++k) acc += pk.Aprime.at(i, k) * s[size_t(k)];
    if (i == p.m && (mu & 1)) acc += p.q / 2;
    out.c[size_t(i)] = acc & mask;
  }
  return out;
}

int alt_dec(const LweParams& p, const std::vector<uint64_t>& sk, const AltCiphertext& c) {
  const uint64_t mask = p.mask();
  uint64_t acc = 0;
  for (int i = 0; i <= p.m; ++i) acc += sk[size_t(i)] * c.c[size_t(i)];
  int64_t v = p.centered(acc & mask);
  uint64_t d0 = uint64_t(v < 0 ? -v : v);
  uint64_t d1 = p.q / 2 - d0;
  return d1 < d0 ? 1 : 0;
}

AltCiphertext alt_xor(const LweParams& p, const AltCiphertext& c1, const AltCiphertext& c2) {
  const uint64_t mask = p.mask();
  AltCiphertext out;
  out.c.resize(c1.c.size());
  for (size_t i = 0; i < c1.c.size(); ++i) out.c[i] = (c1.c[i] + c2.c[i]) & mask;
  return out;
}

AltCiphertext alt_not(const LweParams& p, const AltCiphertext& c) {
  // adding q/2 to the message coordinate flips the bit; noise untouched
  AltCiphertext out = c;
  out.c[size_t(p.m)] = (out.c[size_t(p.m)] + p.q / 2) & p.mask();
  return out;
}

std::optional<AltRecovery> alt_recover(const TrapdoorKeypair& kp, const AltCiphertext& c) {
  const LweParams& p = kp.pk.p;
  const uint64_t mask = p.mask();
  std::vector<uint64_t> head(c.c.begin(), c.c.end() - 1);
  auto se = invert(kp, head);
  if (!se) return std::nullopt;
  AltRecovery out;
  out.s = std::move(se->first);
  out.e = std::move(se->second);
  out.e.resize(size_t(p.m + 1));
  uint64_t acc = c.c[size_t(p.m)];
  for (int k = 0; k < p.n; ++k) acc -= kp.pk.Aprime.at(p.m, k) * out.s[size_t(k)];
  int64_t v = p.centered(acc & mask);
  uint64_t d0 = uint64_t(v < 0 ? -v : v);
  if (p.q / 2 - d0 < d0) {
    out.mu = 1;
    out.e[size_t(p.m)] = p.centered((uint64_t(v) - p.q / 2) & mask);
  } else {
    out.mu = 0;
    out.e[size_t(p.m)] = v;
  }
  return out;
}

}  // namespace qotp
