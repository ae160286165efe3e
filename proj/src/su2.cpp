#include "qotp/su2.hpp"

#include <stdexcept>

namespace qotp {

FixedFrac FixedFrac::trunc_from(double v, int k) {
  double scaled = std::ldexp(v, k);
  double t = std::trunc(scaled);
  int64_t num = int64_t(t);
  int64_t lim = int64_t(1) << k;
  if (num > lim) num = lim;
  if (num < -lim) num = -lim;
  return {num, k};
}

FixedFrac FixedFrac::round_from(double v, int k) {
  double scaled = std::ldexp(v, k);
  double r = std::round(scaled);  // ties away from zero
  int64_t num = int64_t(r);
  int64_t lim = int64_t(1) << k;
  if (num > lim) num = lim;
  if (num < -lim) num = -lim;
  return {num, k};
}

Mat2 Mat2::dagger() const {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = std::conj(m[j][i]);
  return r;
}

Mat2 operator*(const Mat2& a, const Mat2& b) {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j];
  return r;
}

Mat2 operator*(cplx s, const Mat2& a) {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = s * a.m[i][j];
  return r;
}

Mat2 operator+(const Mat2& a, const Mat2& b) {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][j] + b.m[i][j];
  return r;
}

Mat2 operator-(const Mat2& a, const Mat2& b) {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][j] - b.m[i][j];
  return r;
}

Quat4 quat_mul(const Quat4& a, const Quat4& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] + a[2] * b[0] + a[3] * b[1] - a[1] * b[3],
          a[0] * b[3] + a[3] * b[0] + a[1] * b[2] - a[2] * b[1]};
}

Quat4 quat_inv(const Quat4& a) { return {a[0], -a[1], -a[2], -a[3]}; }

Mat2 quat_to_matrix(const Quat4& t) {
  Mat2 r;
  r.m[0][0] = cplx(t[0], t[2]);
  r.m[0][1] = cplx(t[3], t[1]);
  r.m[1][0] = cplx(-t[3], t[1]);
  r.m[1][1] = cplx(t[0], -t[2]);
  return r;
}

static double sgn_pos(double x) { return x < 0.0 ? -1.0 : 1.0; }

UnitQuat4 unitary_approx(const Quat4& t) {
  double n = t.norm2();
  if (std::abs(n - 1.0) > 1.0) throw std::domain_error("unitary_approx: | ||t|| - 1 | > 1");
  if (n == 1.0) return t;

  UnitQuat4 out{0.0, 0.0, 0.0, 0.0};
  if (n > 1.0) {
    double acc = 0.0;
    for (int l = 0; l < 4; ++l) {
      double sq = t[l] * t[l];
      if (acc + sq <= 1.0) {
        out[l] = t[l];
        acc += sq;
      } else {
        out[l] = sgn_pos(t[l]) * std::sqrt(1.0 - acc);
        break;  // later coordinates stay 0
      }
    }
  } else {
    double head = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
    out = t;
    out[3] = sgn_pos(t[3]) * std::sqrt(std::max(0.0, 1.0 - head));
  }
  return out;
}

QuatK truncate_k(const UnitQuat4& t, int k) {
  QuatK r;
  r.k = k;
  for (int i = 0; i < 4; ++i) r.c[size_t(i)] = FixedFrac::trunc_from(t[i], k);
  return r;
}

QuatK quat_mul_fixed(const QuatK& a, const QuatK& b) {
  const int k = a.k;
  auto prod = [&](int i, int j) { return a.c[size_t(i)].num * b.c[size_t(j)].num; };
  int64_t p[4] = {
      prod(0, 0) - prod(1, 1) - prod(2, 2) - prod(3, 3),
      prod(0, 1) + prod(1, 0) + prod(2, 3) - prod(3, 2),
      prod(0, 2) + prod(2, 0) + prod(3, 1) - prod(1, 3),
      prod(0, 3) + prod(3, 0) + prod(1, 2) - prod(2, 1),
  };
  QuatK r;
  r.k = k;
  for (int i = 0; i < 4; ++i) {
    int64_t v = p[i];
    int64_t mag = v < 0 ? -v : v;
    mag >>= k;  // drop bits below 2^-k of the exact 2k-bit value
    r.c[size_t(i)] = {v < 0 ? -mag : mag, k};
  }
  return r;
}

QuatK quat_inv_fixed(const QuatK& a) {
  QuatK r = a;
  for (int i = 1; i < 4; ++i) r.c[size_t(i)].num = -r.c[size_t(i)].num;
  return r;
}

double spectral_norm(const Mat2& a) {
  Mat2 g = a.dagger() * a;
  double tr = g.m[0][0].real() + g.m[1][1].real();
  cplx det = g.m[0][0] * g.m[1][1] - g.m[0][1] * g.m[1][0];
  double disc = tr * tr - 4.0 * det.real();
  if (disc < 0.0) disc = 0.0;
  double lmax = 0.5 * (tr + std::sqrt(disc));
  return std::sqrt(std::max(0.0, lmax));
}

double spectral_distance(const Mat2& a, const Mat2& b) { return spectral_norm(a - b); }

double spectral_distance_up_to_phase(const Mat2& a, const Mat2& b) {
  Mat2 c = b.dagger() * a;
  cplx tr = c.m[0][0] + c.m[1][1];
  cplx phase = std::abs(tr) < 1e-300 ? cplx(1.0, 0.0) : tr / std::abs(tr);
  return spectral_distance(a, phase * b);
}

}  // namespace qotp
