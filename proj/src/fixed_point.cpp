#include "qotp/fixed_point.hpp"

#include <stdexcept>

namespace qotp {

static constexpr double PI = 3.14159265358979323846;

FixedPointNumber fp_inverse(FixedPointNumber x, int d) {
  double v = x.to_double();
  if (v <= 0.0 || v >= 2.0) throw std::domain_error("fp_inverse: x must be in (0, 2)");
  PlainBackend k;
  FpCtx<PlainBackend> c(k, x.f);
  Word<PlainBackend> w = w_const(k, x.raw, c.W);
  return {c.decrypt_raw(inv_circuit(c, w, d)), x.f};
}

FixedPointNumber fp_sqrt(FixedPointNumber x, int d) {
  double v = x.to_double();
  if (v < 0.0 || v > 1.0) throw std::domain_error("fp_sqrt: x must be in [0, 1]");
  PlainBackend k;
  FpCtx<PlainBackend> c(k, x.f);
  Word<PlainBackend> w = w_const(k, x.raw, c.W);
  return {c.decrypt_raw(sqrt_circuit(c, w, d)), x.f};
}

static const double DISC_RE[4] = {std::sqrt(0.5), -std::sqrt(0.5), -std::sqrt(0.5), std::sqrt(0.5)};
static const double DISC_IM[4] = {std::sqrt(0.5), std::sqrt(0.5), -std::sqrt(0.5), -std::sqrt(0.5)};
static const double DISC_THETA[4] = {PI / 4, 3 * PI / 4, -3 * PI / 4, -PI / 4};

std::complex<double> taylor_ln_eval(std::complex<double> z, int K, int s) {
  if (s < 1 || s > 4) throw std::domain_error("taylor_ln_eval: disc index in 1..4");
  std::complex<double> center(DISC_RE[s - 1], DISC_IM[s - 1]);
  if (std::abs(z - center) >= 0.9) throw std::domain_error("taylor_ln_eval: z outside the disc");
  // i*theta_s + sum_{n=1..K} (-1)^(n-1) u^n / n with u = (z - c) conj(c),
  // Horner form; plain arithmetic here, the bit-circuit twin lives in
  // arg_circuit / horner_ln.
  std::complex<double> u = (z - center) * std::conj(center);
  std::complex<double> acc(1.0 / K, 0.0);
  for (int n = K - 1; n >= 1; --n) acc = 1.0 / n - u * acc;
  return std::complex<double>(0.0, DISC_THETA[s - 1]) + u * acc;
}

FixedPointNumber arg_over_pi_mod2(FixedPointNumber a, FixedPointNumber b, int K) {
  if (a.f != b.f) throw std::invalid_argument("arg_over_pi_mod2: mismatched precisions");
  double ar = a.to_double(), br = b.to_double();
  int q = ar < 0 ? (br < 0 ? 3 : 2) : (br < 0 ? 4 : 1);
  std::complex<double> center(DISC_RE[q - 1], DISC_IM[q - 1]);
  if (std::abs(std::complex<double>(ar, br) - center) >= 0.9)
    throw std::domain_error("arg_over_pi_mod2: point outside all four discs");
  PlainBackend k;
  FpCtx<PlainBackend> c(k, a.f);
  CWord<PlainBackend> z{w_const(k, a.raw, c.W), w_const(k, b.raw, c.W)};
  return {c.decrypt_raw(arg_circuit(c, z, K)), a.f};
}

}  // namespace qotp
