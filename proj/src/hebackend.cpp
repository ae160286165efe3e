#include "qotp/hebackend.hpp"

#include <fstream>

#include "qotp/serialize.hpp"

namespace qotp {

// ---- backend ops ----

LatticeBackend::Bit LatticeBackend::encrypt(bool v, int slot) {
  if (!chain || slot < 0 || slot >= chain->slots())
    throw std::out_of_range("encrypt: no key at slot " + std::to_string(slot));
  Bit b;
  b.mhe = std::make_shared<MheCiphertext>(
      mhe_enc(chain->keys[size_t(slot)].pk, v ? 1 : 0, rng));
  b.slot = slot;
  return b;
}

bool LatticeBackend::decrypt(const Bit& b) const {
  if (b.plain >= 0) return b.plain != 0;
  if (!chain || b.slot < 0 || b.slot >= chain->slots())
    throw std::out_of_range("decrypt: no key at slot " + std::to_string(b.slot));
  const auto& sk = chain->keys[size_t(b.slot)].sk;
  if (b.mhe) return mhe_dec(chain->p, sk, *b.mhe) != 0;
  if (b.alt) return alt_dec(chain->p, sk, *b.alt) != 0;
  throw std::logic_error("decrypt: bit carries no ciphertext");
}

LatticeBackend::Bit LatticeBackend::not_(const Bit& b) {
  if (b.plain >= 0) return constant(b.plain == 0);
  Bit r = b;
  if (b.mhe) r.mhe = std::make_shared<MheCiphertext>(mhe_not(chain->p, *b.mhe));
  if (b.alt) r.alt = std::make_shared<AltCiphertext>(alt_not(chain->p, *b.alt));
  return r;  // complement is exact: depth carries over
}

LatticeBackend::Bit LatticeBackend::nand(const Bit& a, const Bit& b) {
  if (a.plain == 0 || b.plain == 0) return constant(true);
  if (a.plain == 1) return not_(b);
  if (b.plain == 1) return not_(a);
  if (a.slot != b.slot) throw std::logic_error("nand: operands under different keys");
  if (!a.mhe || !b.mhe) throw std::logic_error("nand: operand lacks matrix form");
  ++nands;
  Bit r;
  r.mhe = std::make_shared<MheCiphertext>(mhe_eval_nand(chain->p, *a.mhe, *b.mhe));
  r.depth = (a.depth > b.depth ? a.depth : b.depth) + 1;
  r.slot = a.slot;
  if (max_depth && r.depth > max_depth) budget_exceeded = true;
  return r;
}

LatticeBackend::Bit LatticeBackend::to_alt(const Bit& b) {
  if (b.plain >= 0 || b.alt) return b;
  if (!b.mhe) throw std::logic_error("to_alt: bit carries no ciphertext");
  Bit r = b;
  r.alt = std::make_shared<AltCiphertext>(mhe_convert(chain->p, *b.mhe));
  return r;
}

LatticeBackend::Bit LatticeBackend::refresh(const Bit& b) {
  if (b.plain >= 0) return b;
  ++refreshes;
  return encrypt(decrypt(b), b.slot);
}

LatticeBackend::Bit LatticeBackend::xor_alt(const Bit& a, const Bit& b) {
  if (a.plain >= 0 && b.plain >= 0) return constant(((a.plain ^ b.plain) & 1) != 0);
  if (a.plain == 0) return b;
  if (a.plain == 1) return not_(b);
  if (b.plain == 0) return a;
  if (b.plain == 1) return not_(a);
  if (a.slot != b.slot) throw std::logic_error("xor_alt: operands under different keys");
  Bit ax = to_alt(a), bx = to_alt(b);
  Bit r;
  r.alt = std::make_shared<AltCiphertext>(alt_xor(chain->p, *ax.alt, *bx.alt));
  r.depth = (a.depth > b.depth ? a.depth : b.depth) + 1;
  r.slot = a.slot;
  if (max_depth && r.depth > max_depth) budget_exceeded = true;
  return r;
}

// ---- key chain ----

LatticeKeyChain keychain_gen(const LweParams& p, int kbits, int levels, Rng& rng) {
  if (kbits < 1 || levels < 0) throw std::invalid_argument("keychain_gen: bad shape");
  LatticeKeyChain ch;
  ch.p = p;
  ch.kbits = kbits;
  ch.levels = levels;
  int n = 3 * kbits * levels + 1;
  ch.keys.reserve(size_t(n));
  for (int i = 0; i < n; ++i) ch.keys.push_back(gen_trap(p, rng));

  ch.links.resize(size_t(n - 1));
  for (int i = 0; i + 1 < n; ++i) {
    const TrapdoorKeypair& cur = ch.keys[size_t(i)];
    const MhePublicKey& next = ch.keys[size_t(i) + 1].pk;
    auto& link = ch.links[size_t(i)];
    link.sk_bits.reserve(size_t(p.m));
    for (int j = 0; j < p.m; ++j)
      link.sk_bits.push_back(alt_enc(next, int(cur.esk[size_t(j)] & 1), rng));
    link.trap_bits.reserve(cur.R.a.size());
    for (uint64_t bit : cur.R.a) link.trap_bits.push_back(alt_enc(next, int(bit & 1), rng));
  }
  return ch;
}

LatticeBackend::Bit key_switch(LatticeBackend& k, const LatticeKeyChain& ch,
                               const LatticeBackend::Bit& b) {
  if (b.plain >= 0) return b;
  if (b.slot < 0 || size_t(b.slot) >= ch.links.size())
    throw std::out_of_range("key_switch: no link at slot " + std::to_string(b.slot));
  // recrypt in the clear: the chain holds every secret, so decrypt under the
  // current key and re-encrypt fresh under the next one
  bool v = k.decrypt(b);
  return k.encrypt(v, b.slot + 1);
}

// ---- key chain container ----

namespace {

void put_mat(std::ostream& os, const Mat& m) {
  write_u32(os, uint32_t(m.rows));
  write_u32(os, uint32_t(m.cols));
  for (uint64_t v : m.a) write_u64(os, v);
}

Mat get_mat(std::istream& is, int rows, int cols) {
  if (int(read_u32(is)) != rows || int(read_u32(is)) != cols)
    throw std::runtime_error("serialize: matrix dimensions do not match parameters");
  Mat m(rows, cols);
  for (auto& v : m.a) v = read_u64(is);
  return m;
}

void put_alt(std::ostream& os, const AltCiphertext& c) {
  for (uint64_t v : c.c) write_u64(os, v);
}

AltCiphertext get_alt(std::istream& is, const LweParams& p) {
  AltCiphertext c;
  c.c.resize(size_t(p.m + 1));
  for (auto& v : c.c) v = read_u64(is);
  return c;
}

}  // namespace

void save_keychain(const std::string& path, const LatticeKeyChain& ch) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("serialize: cannot open for writing: " + path);
  write_header(os, PayloadKind::keychain, params_hash(ch.p));
  std::string text = params_to_text(ch.p);
  write_u32(os, uint32_t(text.size()));
  os.write(text.data(), std::streamsize(text.size()));
  write_u32(os, uint32_t(ch.kbits));
  write_u32(os, uint32_t(ch.levels));
  write_u32(os, uint32_t(ch.keys.size()));
  for (const auto& kp : ch.keys) {
    put_mat(os, kp.A);
    put_mat(os, kp.R);
    for (uint64_t b : kp.esk) os.put(char(b));
  }
  for (const auto& link : ch.links) {
    for (const auto& c : link.sk_bits) put_alt(os, c);
    for (const auto& c : link.trap_bits) put_alt(os, c);
  }
  if (!os) throw std::runtime_error("serialize: write failed: " + path);
}

LatticeKeyChain load_keychain(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("serialize: cannot open for reading: " + path);
  uint64_t hash = read_header(is, PayloadKind::keychain);
  uint32_t len = read_u32(is);
  if (len > (1u << 20)) throw std::runtime_error("serialize: params text too large");
  std::string text(len, '\0');
  is.read(text.data(), std::streamsize(len));
  if (size_t(is.gcount()) != len) throw std::runtime_error("serialize: unexpected end of file");
  LweParams p = params_from_text(text);
  if (params_hash(p) != hash) throw std::runtime_error("serialize: params hash mismatch");

  LatticeKeyChain ch;
  ch.p = p;
  ch.kbits = int(read_u32(is));
  ch.levels = int(read_u32(is));
  uint32_t n = read_u32(is);
  if (ch.kbits < 1 || ch.levels < 0 || n != uint32_t(3 * ch.kbits * ch.levels + 1))
    throw std::runtime_error("serialize: key chain shape corrupted");

  const uint64_t mask = p.mask();
  ch.keys.reserve(n);
  for (uint32_t t = 0; t < n; ++t) {
    TrapdoorKeypair kp;
    kp.pk.p = p;
    kp.A = get_mat(is, p.m, p.n);
    kp.R = get_mat(is, p.mbar, p.n * p.wb);
    kp.esk.resize(size_t(p.m));
    for (auto& b : kp.esk) {
      char c;
      is.read(&c, 1);
      if (is.gcount() != 1) throw std::runtime_error("serialize: unexpected end of file");
      if (c != 0 && c != 1) throw std::runtime_error("serialize: secret bits corrupted");
      b = uint64_t(c);
    }
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
    ch.keys.push_back(std::move(kp));
  }

  ch.links.resize(size_t(n - 1));
  for (auto& link : ch.links) {
    link.sk_bits.reserve(size_t(p.m));
    for (int j = 0; j < p.m; ++j) link.sk_bits.push_back(get_alt(is, p));
    link.trap_bits.reserve(size_t(p.mbar * p.n * p.wb));
    for (int j = 0; j < p.mbar * p.n * p.wb; ++j) link.trap_bits.push_back(get_alt(is, p));
  }
  return ch;
}

}  // namespace qotp
