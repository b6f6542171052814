#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "resolab/potential.hpp"

namespace resolab {

using SparseMatrixC = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;

/// Uniform tensor grid on [-L, L]^n with N interior points per axis and
/// homogeneous Dirichlet conditions at +-L.
struct Grid {
  int dimension = 1;
  int points = 1200;       // N per axis
  double half_width = 12;  // L

  double spacing() const { return 2.0 * half_width / (points + 1); }
  double coordinate(int i) const { return -half_width + (i + 1) * spacing(); }
  std::size_t size() const;
  std::vector<double> axis() const;
};

enum class DistortionMode { GlobalRotation, ExteriorScaling };

/// x -> x e^{i theta} (global) or x -> x + i theta f(x) (exterior), with f a
/// smooth odd profile vanishing on [0, R0] and equal to x on [R1, infinity).
struct DistortionSpec {
  DistortionMode mode = DistortionMode::GlobalRotation;
  double theta = 0.0;
  double inner_radius = 0.0;  // R0
  double outer_radius = 0.0;  // R1

  static DistortionSpec rotation(double theta) { return {DistortionMode::GlobalRotation, theta, 0.0, 0.0}; }
  static DistortionSpec exterior(double theta, double r0, double r1) {
    return {DistortionMode::ExteriorScaling, theta, r0, r1};
  }

  /// Profile f and its first two derivatives (exterior mode).
  double profile(double x) const;
  double profile_derivative(double x) const;
  double profile_second_derivative(double x) const;

  /// Complex coordinate of a real point and d(map)/dx.
  Complex map(double x) const;
  Complex jacobian(double x) const;

  /// Throws ValidationError when theta or the radii are inconsistent with the grid.
  void validate(const Grid& grid) const;
};

std::string to_string(DistortionMode mode);
DistortionMode distortion_mode_from_string(const std::string& name);

struct AssembleOptions {
  int fd_order = 2;  // 2 or 4
  int min_points = 32;
};

/// Grid discretization of the distorted operator P_theta.
struct DistortedOperator {
  int dimension = 1;
  Grid grid;
  double h = 0.0;
  DistortionSpec distortion;
  int fd_order = 2;
  SparseMatrixC matrix;
  std::vector<double> axis;          // real coordinates per axis
  std::vector<Complex> mapped_axis;  // complex coordinates per axis
  std::vector<Complex> jacobian_axis;
  Eigen::VectorXcd potential_diagonal;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
  /// Max absolute column sum.
  double norm1() const;
  /// Grid cell volume dx^n.
  double cell_volume() const;
};

/// Central-difference second-derivative matrix on `grid`'s axis (Dirichlet,
/// points beyond the box treated as zero).
Eigen::SparseMatrix<double> fd_second_derivative(const Grid& grid, int order);
Eigen::SparseMatrix<double> fd_first_derivative(const Grid& grid, int order);

DistortedOperator assemble(const Potential& V, double h, const DistortionSpec& spec, const Grid& grid,
                           const AssembleOptions& options = {});

struct DenseEigenOptions {
  std::size_t size_limit = 4096;
  bool vectors = false;
};

struct DenseEigenResult {
  Eigen::VectorXcd values;   // sorted by distance to `center`
  Eigen::MatrixXcd vectors;  // columns match values, when requested
  /// max ||(A - z) v|| / ||A|| over returned pairs (vectors requested only).
  double max_backward_error = 0.0;
};

/// All eigenvalues of the assembled matrix by a dense non-Hermitian solve.
DenseEigenResult eigenvalues(const DistortedOperator& op, Complex center = {},
                             const DenseEigenOptions& options = {});

struct WindowEigenOptions {
  int initial_krylov = 60;
  int max_krylov = 900;
  /// Converged Ritz values outside the disk required before stopping.
  int guard = 3;
  double tolerance = 1e-10;  // relative to ||A||_1
  std::uint64_t seed = 0x5eed;
};

struct EigenPair {
  Complex z;
  double residual = 0.0;  // ||(A - z) v|| / (||A||_1 ||v||)
};

/// Eigenvalues of the operator inside the open disk |z - center| < radius, by
/// shift-invert Arnoldi about `center` with a sparse LU factorization.
std::vector<EigenPair> window_eigenvalues(const DistortedOperator& op, Complex center, double radius,
                                          const WindowEigenOptions& options = {});

/// Distortion angle rule: theta = h |ln h| or a fixed value.
struct ThetaPolicy {
  enum class Kind { Paper, Fixed };
  Kind kind = Kind::Paper;
  double value = 0.0;

  double theta_for(double h) const;
};

struct StabilityConfig {
  double eta = 0.2;           // theta -> theta (1 + eta)
  double refine_factor = 1.5; // N -> ceil(refine_factor N)
  double stab_tol = 1e-3;     // in units of h
  double imag_tol = 1e-3;     // Im z <= imag_tol * h
  double cluster_tol = 1e-3;  // in units of h
};

/// Everything the resonance pipeline needs besides the potential.
struct SpectralConfig {
  Grid grid;
  AssembleOptions assemble;
  DistortionMode mode = DistortionMode::GlobalRotation;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  ThetaPolicy theta;
  StabilityConfig stability;
  WindowEigenOptions window;

  DistortionSpec distortion_for(double h) const;
};

struct Resonance {
  Complex z;
  double theta_shift = 0.0;  // |z(theta (1+eta)) - z(theta)|
  double grid_shift = 0.0;   // |z(refined grid) - z|
  int cluster = 1;
};

struct ResonanceSet {
  double h = 0.0;
  double theta = 0.0;
  double E0 = 0.0;
  double C = 0.0;
  std::vector<Resonance> resonances;  // ascending |Im z|
  /// Window eigenvalues rejected by the stability filter.
  std::vector<Complex> rejected;
  int base_count = 0;

  std::vector<Complex> values() const;
};

/// theta- and grid-stable eigenvalues of P_theta in B(E0, C h) with Im z <= tol.
ResonanceSet resonances(const Potential& V, double E0, double h, double C, const SpectralConfig& config);

/// Smooth radial cutoff: 1 for r <= radius, 0 for r >= 2 radius.
double cutoff(double r, double radius);

struct ProbeOptions {
  int max_iterations = 300;
  double tolerance = 1e-8;
  std::uint64_t seed = 0x9e3779b9;
  Eigen::VectorXd center;  // cutoff center, empty = origin
};

struct ResolventEstimate {
  double norm = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Factorization of (op - z) failed or the estimate overflowed.
  bool at_resonance = false;
};

/// Largest singular value of chi (op - z)^{-1} chi by power iteration on M* M,
/// with one sparse LU of (op - z).
ResolventEstimate resolvent_probe(const DistortedOperator& op, Complex z, double cutoff_radius,
                                  const ProbeOptions& options = {});

struct InverseIterationOptions {
  int max_iterations = 60;
  double tolerance = 1e-10;  // relative to max(1, ||A||_1)
  std::uint64_t seed = 0xabcdef;
};

struct ResonantVector {
  Eigen::VectorXcd u;  // unit grid-L^2 norm, largest entry real positive
  Complex eigenvalue;
  double residual = 0.0;
  int iterations = 0;
};

/// Inverse iteration with shift z.
ResonantVector resonant_vector(const DistortedOperator& op, Complex z, const InverseIterationOptions& options = {});

/// Matrix Market (coordinate complex general) dump of the assembled matrix.
void write_matrix_market(const DistortedOperator& op, const std::string& path);

}  // namespace resolab
