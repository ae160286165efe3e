#include "qotp/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace qotp {

namespace {

void fail(const std::string& what) { throw std::runtime_error("serialize: " + what); }

void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), std::streamsize(n));
}

void read_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), std::streamsize(n));
  if (size_t(is.gcount()) != n) fail("unexpected end of file");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open for reading: " + path);
  return is;
}

void write_mat(std::ostream& os, const Mat& m) {
  write_u32(os, uint32_t(m.rows));
  write_u32(os, uint32_t(m.cols));
  for (uint64_t v : m.a) write_u64(os, v);
}

Mat read_mat(std::istream& is, int expect_rows, int expect_cols) {
  int r = int(read_u32(is)), c = int(read_u32(is));
  if (r != expect_rows || c != expect_cols) fail("matrix dimensions do not match parameters");
  Mat m(r, c);
  for (auto& v : m.a) v = read_u64(is);
  return m;
}

}  // namespace

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
  write_bytes(os, b, 8);
}

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (unsigned char)(v >> (8 * i));
  write_bytes(os, b, 4);
}

uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  read_bytes(is, b, 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  read_bytes(is, b, 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
  return v;
}

uint64_t params_hash(const LweParams& p) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : params_to_text(p)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_header(std::ostream& os, PayloadKind kind, uint64_t hash) {
  write_bytes(os, "QOTP", 4);
  unsigned char v[4] = {
      (unsigned char)(kSerialVersion & 0xff), (unsigned char)(kSerialVersion >> 8),
      (unsigned char)(uint16_t(kind) & 0xff), (unsigned char)(uint16_t(kind) >> 8)};
  write_bytes(os, v, 4);
  write_u64(os, hash);
}

uint64_t read_header(std::istream& is, PayloadKind expect) {
  char magic[4];
  read_bytes(is, magic, 4);
  if (std::string(magic, 4) != "QOTP") fail("bad magic");
  unsigned char v[4];
  read_bytes(is, v, 4);
  uint16_t version = uint16_t(v[0]) | uint16_t(v[1]) << 8;
  uint16_t kind = uint16_t(v[2]) | uint16_t(v[3]) << 8;
  if (version != kSerialVersion) fail("unsupported version");
  if (kind != uint16_t(expect)) fail("payload kind mismatch");
  return read_u64(is);
}

void save_params(const std::string& path, const LweParams& p) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail("cannot open for writing: " + path);
  os << params_to_text(p);
}

LweParams load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("cannot open for reading: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return params_from_text(text);
}

void save_keypair(const std::string& path, const TrapdoorKeypair& kp) {
  auto os = open_out(path);
  write_header(os, PayloadKind::keypair, params_hash(kp.pk.p));
  std::string text = params_to_text(kp.pk.p);
  write_u32(os, uint32_t(text.size()));
  write_bytes(os, text.data(), text.size());
  write_mat(os, kp.A);
  write_mat(os, kp.R);
  for (uint64_t b : kp.esk) os.put(char(b));
  if (!os) fail("write failed: " + path);
}

TrapdoorKeypair load_keypair(const std::string& path) {
  auto is = open_in(path);
  uint64_t hash = read_header(is, PayloadKind::keypair);
  uint32_t len = read_u32(is);
  if (len > (1u << 20)) fail("params text too large");
  std::string text(len, '\0');
  read_bytes(is, text.data(), len);
  LweParams p = params_from_text(text);
  if (params_hash(p) != hash) fail("params hash mismatch");

  TrapdoorKeypair kp;
  kp.pk.p = p;
  kp.A = read_mat(is, p.m, p.n);
  kp.R = read_mat(is, p.mbar, p.n * p.wb);
  kp.esk.resize(size_t(p.m));
  for (auto& b : kp.esk) {
    char c;
    read_bytes(is, &c, 1);
    if (c != 0 && c != 1) fail("secret bits corrupted");
    b = uint64_t(c);
  }

  // rebuild the derived public row and secret vector
  const uint64_t mask = p.mask();
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

void save_mhe_ct(const std::string& path, const LweParams& p, const MheCiphertext& ct) {
  auto os = open_out(path);
  write_header(os, PayloadKind::mhe_ct, params_hash(p));
  write_u32(os, uint32_t(ct.depth));
  write_mat(os, ct.C);
  if (!os) fail("write failed: " + path);
}

MheCiphertext load_mhe_ct(const std::string& path, const LweParams& p) {
  auto is = open_in(path);
  if (read_header(is, PayloadKind::mhe_ct) != params_hash(p)) fail("params hash mismatch");
  MheCiphertext ct;
  ct.depth = int(read_u32(is));
  ct.C = read_mat(is, p.m + 1, p.N);
  return ct;
}

void save_alt_ct(const std::string& path, const LweParams& p, const AltCiphertext& ct) {
  auto os = open_out(path);
  write_header(os, PayloadKind::alt_ct, params_hash(p));
  for (uint64_t v : ct.c) write_u64(os, v);
  if (!os) fail("write failed: " + path);
}

AltCiphertext load_alt_ct(const std::string& path, const LweParams& p) {
  auto is = open_in(path);
  if (read_header(is, PayloadKind::alt_ct) != params_hash(p)) fail("params hash mismatch");
  AltCiphertext ct;
  ct.c.resize(size_t(p.m + 1));
  for (auto& v : ct.c) v = read_u64(is);
  return ct;
}

}  // namespace qotp
