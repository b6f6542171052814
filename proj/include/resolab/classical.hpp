#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "resolab/potential.hpp"

namespace resolab {

/// Principal symbol p(x, xi) = |xi|^2 + V(x).
double hamiltonian(const Potential& V, const Eigen::VectorXd& x, const Eigen::VectorXd& xi);

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> xi;
  std::vector<double> energy;
  /// max_t |p(t) - p(0)| over all integrator steps, not only recorded samples.
  double max_energy_drift = 0.0;
  bool escaped = false;
  double escape_time = std::numeric_limits<double>::quiet_NaN();
};

struct FlowOptions {
  /// Phase-space radius (about `box_center`) whose exit stops the flow.
  double box_radius = std::numeric_limits<double>::infinity();
  Eigen::VectorXd box_center;  // empty = origin
  /// Record every k-th step (the final state is always recorded).
  int record_stride = 1;
};

/// Stormer-Verlet integration of x' = 2 xi, xi' = -grad V(x) up to time T
/// (T < 0 integrates backward) with step |dt|.
Trajectory flow(const Potential& V, const Eigen::VectorXd& x0, const Eigen::VectorXd& xi0, double T,
                double dt, const FlowOptions& options = {});

struct TrappedOptions {
  double dt = 1e-3;
  /// Samples satisfy |(x - x*, xi)| >= r_min_fraction * shell_radius.
  double r_min_fraction = 0.1;
  /// Escape box radius in units of shell_radius.
  double box_factor = 10.0;
  Eigen::VectorXd center;  // x*, empty = origin
  int jobs = 1;
  /// Upper bound on rejection-sampling attempts per requested sample.
  int max_attempts_per_sample = 1000;
};

struct TrappedReport {
  int requested = 0;
  int evaluated = 0;
  int rejected = 0;  // draws off the energy shell or outside the radial band
  int trapped = 0;
  /// Undefined when no sample was evaluated.
  std::optional<double> trapped_fraction;
  double min_escape_forward = std::numeric_limits<double>::infinity();
  double min_escape_backward = std::numeric_limits<double>::infinity();
  double max_escape_time = 0.0;  // over samples that escaped in both directions
  /// Every evaluated sample left the box in both time directions.
  bool non_trapping() const { return evaluated > 0 && trapped == 0; }
};

/// Samples the energy shell p = E0 near the barrier and reports how many
/// samples stay in the box for |t| <= T_max in both time directions.
/// Deterministic for a fixed seed.
TrappedReport trapped_diagnostic(const Potential& V, double E0, double shell_radius, double T_max,
                                 int samples, std::uint64_t seed, const TrappedOptions& options = {});

/// Truncated Taylor expansion of the generating function phi_+ or phi_- in
/// the barrier's eigen-coordinates y = axes^T (x - x*).
class TaylorPhase {
 public:
  TaylorPhase() = default;
  TaylorPhase(int sign, Series coefficients, Eigen::VectorXd lambda, Eigen::VectorXd center,
              Eigen::MatrixXd axes, double energy);

  int sign() const { return sign_; }
  int order() const { return coeffs_.order(); }
  int dimension() const { return coeffs_.nvars(); }
  const Series& coefficients() const { return coeffs_; }
  double coefficient(const MultiIndex& alpha) const { return coeffs_.coefficient(alpha); }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::MatrixXd& axes() const { return axes_; }
  double energy() const { return energy_; }

  /// Local coordinates of a global point.
  Eigen::VectorXd local(const Eigen::VectorXd& x) const;

  /// Phase, gradient and Laplacian at a local (possibly complex) point.
  std::complex<double> value(std::span<const std::complex<double>> y) const;
  std::vector<std::complex<double>> gradient(std::span<const std::complex<double>> y) const;
  std::complex<double> laplacian(std::span<const std::complex<double>> y) const;
  double value(double y) const;
  double derivative(double y) const;

  /// |grad phi|^2 + V - E0 at a global real point.
  double eikonal_residual(const Potential& V, const Eigen::VectorXd& x) const;

 private:
  int sign_ = 1;
  Series coeffs_;
  std::vector<Series> grad_;
  Series laplacian_;
  Eigen::VectorXd lambda_;
  Eigen::VectorXd center_;
  Eigen::MatrixXd axes_;
  double energy_ = 0.0;
};

/// Solves |grad phi|^2 + V = E0 order by order with quadratic part
/// sign * sum lambda_j y_j^2 / 4, up to total degree K >= 2.
TaylorPhase eikonal_taylor(const Potential& V, const BarrierData& bd, int sign, int K);

struct Linearization {
  /// [[0, 2 Id], [diag(lambda^2)/2, 0]] in eigen-coordinates (x first, then xi).
  Eigen::MatrixXd F;
  /// Ascending: -lambda_n, ..., -lambda_1, lambda_1, ..., lambda_n.
  Eigen::VectorXd eigenvalues;
  /// Columns: eigenvectors matching `eigenvalues`.
  Eigen::MatrixXd eigenvectors;
  Eigen::MatrixXd inverse_eigenvectors;

  /// Spectral projection onto the eigenspace of F for eigenvalue mu (ties merged).
  Eigen::MatrixXd projection(double mu, double tol = 1e-9) const;
};

Linearization linearize(const BarrierData& bd);

}  // namespace resolab
