#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "resolab/potential.hpp"

namespace resolab {

struct LatticePoint {
  Complex z;
  /// sum_j lambda_j (1/2 + alpha_j), shared by all witnesses.
  double level = 0.0;
  int multiplicity = 0;
  std::vector<MultiIndex> witnesses;
};

/// Points E0 - i h sum_j lambda_j (1/2 + alpha_j) + h s inside the open disk
/// B(E0, C h), grouped into multiplicity classes, ascending by level.
struct PseudoResonanceLattice {
  double E0 = 0.0;
  std::vector<double> lambda;
  double h = 0.0;
  double C = 0.0;
  Complex shift{0.0, 0.0};
  std::vector<LatticePoint> points;

  /// The lattice value for a given multi-index (no window test).
  Complex value(const MultiIndex& alpha) const;
  std::vector<Complex> values() const;
};

/// Relative tolerance used to group equal lattice levels.
inline constexpr double kLatticeTolerance = 1e-12;

PseudoResonanceLattice pseudo_resonances(double E0, std::span<const double> lambda, double h, double C,
                                         Complex shift = {});
PseudoResonanceLattice pseudo_resonances(const BarrierData& bd, double h, double C, Complex shift = {});

/// Exceptional set Gamma_0(h) intersected with B(0, C h): the lattice with
/// E0 = 0 shifted by h p1(0, 0, h).
PseudoResonanceLattice gamma0(std::span<const double> lambda, Complex p1_at_origin, double h, double C);

struct MuSequence {
  std::vector<double> lambda;
  std::vector<double> values;  // mu_0 = 0 < mu_1 < ...
  std::vector<int> counts;     // number of alpha with alpha . lambda = mu_k
};

/// First `count` distinct values of { alpha . lambda : alpha in N^n }.
MuSequence mu_sequence(std::span<const double> lambda, int count);

/// True when no other alpha has alpha . lambda = alpha0 . lambda.
bool is_simple(const MultiIndex& alpha0, std::span<const double> lambda);

}  // namespace resolab
