#pragma once
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>

namespace qotp {

using cplx = std::complex<double>;

// Signed k-bit binary fraction stored as an integer numerator:
// value = num / 2^k, |num| <= 2^k, so the endpoints +-1 are representable
// (the unit bit is implied by |num| == 2^k). num == 0 carries no sign, which
// makes a "-0" encoding impossible by construction.
struct FixedFrac {
  int64_t num = 0;
  int k = 1;

  double value() const { return std::ldexp(double(num), -k); }
  bool sign() const { return num < 0; }
  bool is_unit() const { return (num < 0 ? -num : num) == (int64_t(1) << k); }
  // j-th fractional bit of |value|, j = 1 (most significant) .. k.
  int bit(int j) const {
    int64_t mag = num < 0 ? -num : num;
    return int((mag >> (k - j)) & 1);
  }

  static FixedFrac trunc_from(double v, int k);  // round toward zero
  static FixedFrac round_from(double v, int k);  // nearest, ties away from zero

  friend bool operator==(const FixedFrac&, const FixedFrac&) = default;
};

// SU(2) index vector in reference (double) arithmetic. Unit norm is a
// per-use contract, not a type invariant.
struct Quat4 {
  std::array<double, 4> t{1.0, 0.0, 0.0, 0.0};

  Quat4() = default;
  Quat4(double a, double b, double c, double d) : t{a, b, c, d} {}
  double& operator[](int i) { return t[size_t(i)]; }
  double operator[](int i) const { return t[size_t(i)]; }
  double norm2() const {
    return std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2] + t[3] * t[3]);
  }
  friend bool operator==(const Quat4&, const Quat4&) = default;
};

using UnitQuat4 = Quat4;

// k-bit fixed-point index vector — the form pad keys take.
struct QuatK {
  std::array<FixedFrac, 4> c{};
  int k = 1;
  Quat4 value() const {
    return {c[0].value(), c[1].value(), c[2].value(), c[3].value()};
  }
  friend bool operator==(const QuatK&, const QuatK&) = default;
};

// Row-major 2x2 complex matrix.
struct Mat2 {
  cplx m[2][2]{};

  static Mat2 eye() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }
  Mat2 dagger() const;
  friend Mat2 operator*(const Mat2& a, const Mat2& b);
  friend Mat2 operator*(cplx s, const Mat2& a);
  friend Mat2 operator+(const Mat2& a, const Mat2& b);
  friend Mat2 operator-(const Mat2& a, const Mat2& b);
};

Quat4 quat_mul(const Quat4& a, const Quat4& b);
Quat4 quat_inv(const Quat4& a);
Mat2 quat_to_matrix(const Quat4& t);

// Nearest-unit-vector repair: greedy coordinate fill when ||t|| >= 1,
// last-coordinate adjustment when ||t|| < 1. Guarantees ||t'|| = 1 and
// ||t - t'|| <= sqrt(3*| ||t|| - 1 |). Throws std::domain_error when
// | ||t|| - 1 | > 1. sgn(0) is taken as +1.
UnitQuat4 unitary_approx(const Quat4& t);

// Keep sign + k most significant fractional bits of each component
// (truncation toward zero, ||t - t'||_inf <= 2^-k).
QuatK truncate_k(const UnitQuat4& t, int k);

// Same bilinear product on k-bit components: exact 2k-bit integer products,
// result truncated toward zero back to k bits. Matches the homomorphic
// word-arithmetic path bit for bit.
QuatK quat_mul_fixed(const QuatK& a, const QuatK& b);
QuatK quat_inv_fixed(const QuatK& a);

// Largest singular value of a - b.
double spectral_distance(const Mat2& a, const Mat2& b);
double spectral_norm(const Mat2& a);
// min over global phase of ||a - e^{i theta} b||_2 (phase from tr(b^dag a)).
double spectral_distance_up_to_phase(const Mat2& a, const Mat2& b);

}  // namespace qotp
