#include "qotp/euler.hpp"

#include <cmath>

namespace qotp {

static constexpr double PI = 3.14159265358979323846;
static constexpr double DEG_THR = 0x1.0p-20;

Mat2 euler_to_matrix(const EulerAnglesD& e) {
  double cb = std::cos(PI * e.beta), sb = std::sin(PI * e.beta);
  cplx ea = std::polar(1.0, 2 * PI * e.alpha), eg = std::polar(1.0, 2 * PI * e.gamma);
  Mat2 r;
  r.m[0][0] = cb;
  r.m[0][1] = -sb * eg;
  r.m[1][0] = sb * ea;
  r.m[1][1] = cb * ea * eg;
  return r;
}

Mat2 euler_to_matrix(const EulerAngles& e) {
  return euler_to_matrix(EulerAnglesD{e.alpha(), e.beta(), e.gamma()});
}

static double mod1(double v) {
  v = std::fmod(v, 1.0);
  if (v < 0) v += 1.0;
  return v == 1.0 ? 0.0 : v;  // -eps + 1 can round up to 1
}

std::pair<EulerAnglesD, cplx> quat_to_euler_exact(const UnitQuat4& t) {
  double x = t[0] * t[0] + t[2] * t[2];
  double y = t[1] * t[1] + t[3] * t[3];
  double cb = std::sqrt(x), sb = std::sqrt(y);
  EulerAnglesD e;
  e.beta = std::atan2(sb, cb) / PI;
  cplx phase;
  if (sb < DEG_THR) {
    // diagonal case: fold everything into alpha
    e.alpha = mod1(std::atan2(-2 * t[0] * t[2], t[0] * t[0] - t[2] * t[2]) / (2 * PI));
    e.gamma = 0;
    phase = std::conj(cplx(t[0], t[2])) / cb;
  } else if (cb < DEG_THR) {
    // antidiagonal case: fold everything into gamma
    e.alpha = 0;
    e.gamma = mod1(std::atan2(-2 * t[1] * t[3], t[1] * t[1] - t[3] * t[3]) / (2 * PI) + 0.5);
    phase = std::conj(cplx(-t[3], t[1])) / sb;
  } else {
    e.alpha = mod1(std::atan2(t[0] * t[1] + t[2] * t[3], t[1] * t[2] - t[0] * t[3]) / (2 * PI));
    e.gamma = mod1(std::atan2(t[2] * t[3] - t[0] * t[1], -(t[0] * t[3] + t[1] * t[2])) / (2 * PI));
    phase = std::conj(cplx(t[0], t[2])) / cb;
  }
  return {e, phase};
}

EulerAngles euler_from_quat_approx(const QuatK& t, int degree, int m_out) {
  PlainBackend pb;
  EncQuat<PlainBackend> enc = encrypt_quat(pb, t);
  return decrypt_euler(pb, he_euler_from_quat(pb, enc, degree, m_out));
}

EulerAngles euler_from_quat_approx(const Quat4& t, int degree, int m_out) {
  return euler_from_quat_approx(truncate_k(t, 16), degree, m_out);
}

}  // namespace qotp
