#include "qotp/qsim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qotp {

StateVector StateVector::basis(int n_qubits, uint64_t index) {
  StateVector s;
  s.n = n_qubits;
  s.amp.assign(size_t(1) << n_qubits, cplx(0, 0));
  s.amp[index] = cplx(1, 0);
  return s;
}

double StateVector::norm() const {
  double s = 0;
  for (const cplx& a : amp) s += std::norm(a);
  return std::sqrt(s);
}

void StateVector::normalize() {
  double nz = norm();
  if (nz == 0.0) throw std::runtime_error("cannot normalize zero state");
  for (cplx& a : amp) a /= nz;
}

std::string StateVector::dump() const {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < amp.size(); ++i)
    os << i << " " << amp[i].real() << " " << amp[i].imag() << "\n";
  return os.str();
}

static bool near_unitary(const Mat2& g, double tol) {
  Mat2 p = g.dagger() * g;
  return std::abs(p.m[0][0] - cplx(1, 0)) <= tol && std::abs(p.m[1][1] - cplx(1, 0)) <= tol &&
         std::abs(p.m[0][1]) <= tol && std::abs(p.m[1][0]) <= tol;
}

void apply_1q(StateVector& s, int target, const Mat2& g, bool unitary_mode) {
  if (target < 0 || target >= s.n) throw std::out_of_range("apply_1q: bad target");
  if (unitary_mode && !near_unitary(g, 1e-8))
    throw std::invalid_argument("apply_1q: gate not unitary (use non-unitary mode)");
  const size_t step = size_t(1) << target;
  const size_t size = s.amp.size();
  for (size_t base = 0; base < size; base += 2 * step) {
    for (size_t off = 0; off < step; ++off) {
      cplx a0 = s.amp[base + off];
      cplx a1 = s.amp[base + off + step];
      s.amp[base + off] = g.m[0][0] * a0 + g.m[0][1] * a1;
      s.amp[base + off + step] = g.m[1][0] * a0 + g.m[1][1] * a1;
    }
  }
  if (unitary_mode) s.normalize();
}

void apply_cnot(StateVector& s, int ctrl, int tgt) {
  if (ctrl == tgt) throw std::invalid_argument("apply_cnot: ctrl == tgt");
  if (ctrl < 0 || ctrl >= s.n || tgt < 0 || tgt >= s.n)
    throw std::out_of_range("apply_cnot: bad index");
  const size_t cbit = size_t(1) << ctrl, tbit = size_t(1) << tgt;
  for (size_t i = 0; i < s.amp.size(); ++i)
    if ((i & cbit) && !(i & tbit)) std::swap(s.amp[i], s.amp[i | tbit]);
}

double h_distance(const StateVector& a, const StateVector& b) {
  if (a.amp.size() != b.amp.size()) throw std::invalid_argument("h_distance: dimension mismatch");
  double s = 0;
  for (size_t i = 0; i < a.amp.size(); ++i) s += std::norm(a.amp[i] - b.amp[i]);
  return std::sqrt(0.5 * s);
}

double trace_distance_pure(const StateVector& a, const StateVector& b) {
  if (a.amp.size() != b.amp.size())
    throw std::invalid_argument("trace_distance_pure: dimension mismatch");
  if (std::abs(a.norm() - 1.0) > 1e-6 || std::abs(b.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("trace_distance_pure: inputs must be normalized");
  cplx ip(0, 0);
  for (size_t i = 0; i < a.amp.size(); ++i) ip += std::conj(a.amp[i]) * b.amp[i];
  double resid = 0;
  for (size_t i = 0; i < a.amp.size(); ++i) resid += std::norm(b.amp[i] - ip * a.amp[i]);
  return std::sqrt(resid);
}

int measure_qubit(StateVector& s, int idx, Rng& rng) {
  if (idx < 0 || idx >= s.n) throw std::out_of_range("measure_qubit: bad index");
  const size_t bit = size_t(1) << idx;
  double p1 = 0;
  for (size_t i = 0; i < s.amp.size(); ++i)
    if (i & bit) p1 += std::norm(s.amp[i]);
  int outcome = rng.unit_double() < p1 ? 1 : 0;
  for (size_t i = 0; i < s.amp.size(); ++i)
    if (int((i & bit) != 0) != outcome) s.amp[i] = cplx(0, 0);
  s.normalize();
  return outcome;
}

void DensityAccumulator::add(const StateVector& one_qubit) {
  if (one_qubit.n != 1) throw std::invalid_argument("DensityAccumulator: 1-qubit states only");
  const cplx a = one_qubit.amp[0], b = one_qubit.amp[1];
  sum.m[0][0] += a * std::conj(a);
  sum.m[0][1] += a * std::conj(b);
  sum.m[1][0] += b * std::conj(a);
  sum.m[1][1] += b * std::conj(b);
  ++trials;
}

Mat2 DensityAccumulator::mean() const {
  Mat2 r = sum;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] /= double(trials);
  return r;
}

}  // namespace qotp
