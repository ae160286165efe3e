#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>

#include "qotp/lattice.hpp"

namespace qotp {

// Binary container format: a 16-byte header (magic "QOTP", little-endian u16
// version and payload kind, u64 FNV-1a hash of the canonical parameter text)
// followed by fixed-width little-endian integers. Loaders verify the header
// and the hash against the parameters the caller expects and throw
// std::runtime_error on any mismatch or truncation.

constexpr uint16_t kSerialVersion = 1;

enum class PayloadKind : uint16_t {
  keypair = 2,
  mhe_ct = 3,
  alt_ct = 4,
  qotp_key = 5,
  enc_euler = 6,
  keychain = 7,
  qhe_public = 8,
  qhe_bundle = 9,
};

uint64_t params_hash(const LweParams& p);

void write_header(std::ostream& os, PayloadKind kind, uint64_t hash);
uint64_t read_header(std::istream& is, PayloadKind expect);  // returns stored hash

void write_u64(std::ostream& os, uint64_t v);
void write_u32(std::ostream& os, uint32_t v);
uint64_t read_u64(std::istream& is);
uint32_t read_u32(std::istream& is);

void save_params(const std::string& path, const LweParams& p);
LweParams load_params(const std::string& path);

void save_keypair(const std::string& path, const TrapdoorKeypair& kp);
TrapdoorKeypair load_keypair(const std::string& path);

void save_mhe_ct(const std::string& path, const LweParams& p, const MheCiphertext& ct);
MheCiphertext load_mhe_ct(const std::string& path, const LweParams& p);

void save_alt_ct(const std::string& path, const LweParams& p, const AltCiphertext& ct);
AltCiphertext load_alt_ct(const std::string& path, const LweParams& p);

}  // namespace qotp
