#pragma once

#include <complex>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "resolab/classical.hpp"
#include "resolab/lattice.hpp"
#include "resolab/potential.hpp"
#include "resolab/spectral.hpp"

namespace resolab {

/// How the grid coordinate of a distorted state is related to the physical one.
enum class Unrotation {
  /// Evaluate the (polynomial) phase at the complex grid coordinate and use
  /// d/dy = (1/g) d/dx; exact up to the phase truncation.
  Exact,
  /// Treat the grid coordinate as real; error O(theta) is recorded.
  SmallTheta,
};

struct SymbolOptions {
  double radius = 0.3;  // r, neighborhood |x - x*| <= r
  Unrotation mode = Unrotation::Exact;
  double small_theta_max = 0.1;
};

/// Symbol samples a = e^{-i phi_+/h} u near the barrier top (one dimension).
struct WKBState {
  double h = 0.0;
  Complex z;
  double theta = 0.0;
  Unrotation mode = Unrotation::Exact;
  /// Bound on the coordinate error committed by the unrotation (theta in small-theta mode).
  double unrotation_error = 0.0;
  double radius = 0.0;
  double spacing = 0.0;
  /// Samples cover the neighborhood plus `margin` stencil points on each side.
  int margin = 4;
  std::vector<double> x;       // real grid coordinates
  std::vector<Complex> y;      // coordinates fed to the phase (local, possibly complex)
  std::vector<Complex> g;      // dy/dx
  std::vector<Complex> dg;     // d^2y/dx^2
  std::vector<Complex> a;      // symbol, max |a| = 1 on the neighborhood
  std::vector<Complex> u;      // the state samples the symbol was taken from
  /// a = scale * e^{-i phi/h} u.
  Complex scale;
  /// max |e^{-i phi/h} u| on the neighborhood before normalization.
  double raw_max = 0.0;
  TaylorPhase phase;

  std::size_t size() const { return x.size(); }
  bool inside(std::size_t i) const { return i >= static_cast<std::size_t>(margin) && i + margin < x.size(); }
  /// u recomputed from the symbol: e^{i phi/h} a / scale.
  std::vector<Complex> reconstruct() const;
};

/// Samples of a state on a 1D grid; `spec` describes the distortion the grid
/// values were computed under.
WKBState extract_symbol(const std::vector<double>& axis, const Eigen::VectorXcd& u, const DistortionSpec& spec,
                        const TaylorPhase& phase, double h, Complex z, const SymbolOptions& options = {});
WKBState extract_symbol(const DistortedOperator& op, const Eigen::VectorXcd& u, const TaylorPhase& phase,
                        Complex z, const SymbolOptions& options = {});

struct TransportOptions {
  /// Recompute on the 2 dx sub-grid and reject when the two differ by more than this fraction.
  double coarse_tolerance = 0.5;
  /// Residuals below this are roundoff and skip the comparison.
  double roundoff_floor = 1e-9;
  bool check_coarse = true;
};

struct TransportReport {
  double residual = 0.0;         // ||R|| / ||a|| over the neighborhood
  double coarse_residual = 0.0;  // same on the 2 dx sub-grid
};

/// R = 2 phi' a' + (phi'' - i (z - E0)/h) a - i h a'' by fourth-order differences.
TransportReport transport_residual(const WKBState& state, Complex z, double E0, double h,
                                   const TransportOptions& options = {});

struct AnnihilationGrid {
  int points = 800;
  double half_width = 6.0;
  int fd_order = 2;
  /// Smooth test family x^k exp(-x^2 / (2 width^2)), k = 0..count-1.
  int family_count = 4;
  double family_width = 1.0;
};

struct AnnihilationReport {
  double spacing = 0.0;
  /// max_k ||R f_k|| / ||P f_k|| over the smooth family.
  double residual = 0.0;
  /// ||R|| / ||P|| in the matrix 1-norm over rows at least `fd_order` points from the edge.
  double operator_residual = 0.0;
};

/// Grid residual of A (P - z) - (P - 2 i h - z) A for A = -i h d/dx - x,
/// P = -h^2 d^2/dx^2 - x^2.
AnnihilationReport annihilation_check(double h, Complex z, const AnnihilationGrid& grid = {});

struct DecayTable {
  double h = 0.0;
  /// norms[m] = ||A^m u|| / ||u|| over the neighborhood, m = 0..m_max.
  std::vector<double> norms;
};

/// Powers of A = -i h d/dy - phi_+'(y) applied to a state on the distorted grid.
DecayTable annihilation_decay(const std::vector<double>& axis, const Eigen::VectorXcd& u, const DistortionSpec& spec,
                              const TaylorPhase& phase, double h, int m_max, double radius);
DecayTable annihilation_decay(const DistortedOperator& op, const Eigen::VectorXcd& u, const TaylorPhase& phase,
                              int m_max, double radius);

/// Truncated power series in delta = sigma - sigma0.
using DeltaSeries = std::vector<Complex>;

struct ExpansionResult {
  MultiIndex alpha0;
  double E0 = 0.0;
  std::vector<double> lambda;
  int order = 0;  // K
  Complex sigma0;
  /// G[k][n]: coefficient of delta^n in the h^k part of the alpha0 row.
  std::vector<DeltaSeries> G;
  /// Eliminated rows: rows[k][beta] is the h^k coefficient of a_beta / a_alpha0.
  std::vector<std::map<MultiIndex, DeltaSeries>> rows;
  /// sigma_infinity(h) = sum_m sigma[m] h^m, m = 0..K-1.
  std::vector<Complex> sigma;
  /// z_infinity(h) = sum_k E[k] h^k, k = 0..K.
  std::vector<Complex> E;

  /// sum_k h^k G_k(sigma) with the stored truncation.
  Complex evaluate_G(Complex sigma, double h) const;
  Complex sigma_at(double h) const;
  Complex z_at(double h) const;
};

/// Order-by-order solution of the transport recurrence at the simple lattice
/// point alpha0, giving z_infinity(h) up to h^K.
ExpansionResult taylor_recurrence(const Potential& V, const BarrierData& bd, const MultiIndex& alpha0, int K);

}  // namespace resolab
