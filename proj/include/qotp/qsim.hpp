#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "qotp/rng.hpp"
#include "qotp/su2.hpp"

namespace qotp {

// Little-endian statevector: qubit 0 is the least significant bit of the
// amplitude index.
struct StateVector {
  int n = 0;
  std::vector<cplx> amp;

  static StateVector basis(int n_qubits, uint64_t index);
  double norm() const;
  void normalize();
  std::string dump() const;  // lines "index real imag"
};

// Applies g on `target`. In unitary mode (default) g must be within 1e-8 of
// unitary and the state is renormalized afterwards; non-unitary mode applies
// g raw and never renormalizes (products of near-unitary truncations are
// measured exactly as produced).
void apply_1q(StateVector& s, int target, const Mat2& g, bool unitary_mode = true);
void apply_cnot(StateVector& s, int ctrl, int tgt);

// sqrt(1/2 * sum |a_i - b_i|^2) — plain scaled Euclidean distance.
double h_distance(const StateVector& a, const StateVector& b);

// sqrt(1 - |<a|b>|^2) for normalized pure states; global-phase invariant.
// Computed as the norm of b's component orthogonal to a, which stays accurate
// for distances far below sqrt(machine-eps).
double trace_distance_pure(const StateVector& a, const StateVector& b);

// Born-rule measurement; collapses and renormalizes.
int measure_qubit(StateVector& s, int idx, Rng& rng);

struct DensityAccumulator {
  Mat2 sum{};
  long trials = 0;

  void add(const StateVector& one_qubit);
  Mat2 mean() const;
};

}  // namespace qotp
