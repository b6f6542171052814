#include "resolab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/SparseLU>

#include "resolab/series.hpp"

namespace resolab {

namespace {

using Triplet = Eigen::Triplet<Complex>;
using SparseLUC = Eigen::SparseLU<SparseMatrixC, Eigen::COLAMDOrdering<int>>;

constexpr Complex I{0.0, 1.0};

/// C-infinity step: 0 for t <= 0, 1 for t >= 1, as a jet in the variable of t.
Series smoothstep(const Series& t) {
  const Series a = exp(-reciprocal(t));
  const Series b = exp(-reciprocal(1.0 - t));
  return a / (a + b);
}

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

/// f(s), f'(s), f''(s) for s >= 0.
std::array<double, 3> profile_jet(double s, double r0, double r1) {
  const double w = r1 - r0;
  if (s <= r0) return {0.0, 0.0, 0.0};
  if (s >= r1) return {s, 1.0, 0.0};
  const Series sv = Series::variable(1, 2, 0, s);
  const Series f = sv * smoothstep((sv - r0) / w);
  return {f[{0}], f[{1}], 2.0 * f[{2}]};
}

Eigen::VectorXcd random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v.normalized();
}

SparseMatrixC shifted(const SparseMatrixC& A, Complex z) {
  SparseMatrixC S(A.rows(), A.cols());
  S.setIdentity();
  S = A - z * S;
  S.makeCompressed();
  return S;
}

/// Sum of per-axis 1D operators on the tensor grid (x_1 index fastest).
SparseMatrixC kronecker_sum(const SparseMatrixC& K, int dimension) {
  if (dimension == 1) return K;
  const Eigen::Index N = K.rows();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(2 * K.nonZeros() * N));
  for (Eigen::Index k = 0; k < K.outerSize(); ++k) {
    for (SparseMatrixC::InnerIterator it(K, k); it; ++it) {
      for (Eigen::Index b = 0; b < N; ++b) {
        trips.emplace_back(it.row() + N * b, it.col() + N * b, it.value());
        trips.emplace_back(b + N * it.row(), b + N * it.col(), it.value());
      }
    }
  }
  SparseMatrixC A(N * N, N * N);
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

SparseMatrixC to_complex(const Eigen::SparseMatrix<double>& D) { return D.cast<Complex>(); }

Eigen::SparseMatrix<double> stencil_matrix(int N, const std::vector<double>& weights, double scale) {
  const int half = static_cast<int>(weights.size()) / 2;
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < N; ++i) {
    for (int k = -half; k <= half; ++k) {
      const int j = i + k;
      const double w = weights[static_cast<std::size_t>(k + half)];
      if (j < 0 || j >= N || w == 0.0) continue;
      trips.emplace_back(i, j, w * scale);
    }
  }
  Eigen::SparseMatrix<double> D(N, N);
  D.setFromTriplets(trips.begin(), trips.end());
  return D;
}

/// 1D kinetic part -h^2 (1/g) d/dx (1/g) d/dx for the exterior map.
SparseMatrixC exterior_kinetic(const Grid& grid, double h, const DistortionSpec& spec, int order) {
  const int N = grid.points;
  const double dx = grid.spacing();
  std::vector<Triplet> trips;
  if (order == 2) {
    // Conservative form with g at the half points.
    for (int i = 0; i < N; ++i) {
      const double x = grid.coordinate(i);
      const Complex gi = spec.jacobian(x);
      const Complex gp = spec.jacobian(x + 0.5 * dx);
      const Complex gm = spec.jacobian(x - 0.5 * dx);
      const Complex c = -h * h / (gi * dx * dx);
      trips.emplace_back(i, i, -c * (1.0 / gp + 1.0 / gm));
      if (i + 1 < N) trips.emplace_back(i, i + 1, c / gp);
      if (i > 0) trips.emplace_back(i, i - 1, c / gm);
    }
  } else {
    // Chain-rule form (1/g^2) u'' - (g'/g^3) u' with fourth-order stencils.
    const std::array<double, 5> d2{-1.0 / 12, 4.0 / 3, -5.0 / 2, 4.0 / 3, -1.0 / 12};
    const std::array<double, 5> d1{1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
    for (int i = 0; i < N; ++i) {
      const double x = grid.coordinate(i);
      const Complex g = spec.jacobian(x);
      const Complex gp = I * spec.theta * spec.profile_second_derivative(x);
      const Complex a = -h * h / (g * g * dx * dx);
      const Complex b = h * h * gp / (g * g * g * dx);
      for (int k = -2; k <= 2; ++k) {
        const int j = i + k;
        if (j < 0 || j >= N) continue;
        const Complex w = a * d2[static_cast<std::size_t>(k + 2)] + b * d1[static_cast<std::size_t>(k + 2)];
        if (w != Complex{}) trips.emplace_back(i, j, w);
      }
    }
  }
  SparseMatrixC K(N, N);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

double column_norm1(const SparseMatrixC& A) {
  double best = 0.0;
  for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
    double s = 0.0;
    for (SparseMatrixC::InnerIterator it(A, k); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (int d = 0; d < dimension; ++d) n *= static_cast<std::size_t>(points);
  return n;
}

std::vector<double> Grid::axis() const {
  std::vector<double> x(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) x[static_cast<std::size_t>(i)] = coordinate(i);
  return x;
}

double DistortionSpec::profile(double x) const {
  if (mode == DistortionMode::GlobalRotation) return x;
  const double f = profile_jet(std::abs(x), inner_radius, outer_radius)[0];
  return x < 0.0 ? -f : f;
}

double DistortionSpec::profile_derivative(double x) const {
  if (mode == DistortionMode::GlobalRotation) return 1.0;
  return profile_jet(std::abs(x), inner_radius, outer_radius)[1];
}

double DistortionSpec::profile_second_derivative(double x) const {
  if (mode == DistortionMode::GlobalRotation) return 0.0;
  const double f2 = profile_jet(std::abs(x), inner_radius, outer_radius)[2];
  return x < 0.0 ? -f2 : f2;
}

Complex DistortionSpec::map(double x) const {
  if (mode == DistortionMode::GlobalRotation) return x * std::exp(I * theta);
  return x + I * theta * profile(x);
}

Complex DistortionSpec::jacobian(double x) const {
  if (mode == DistortionMode::GlobalRotation) return std::exp(I * theta);
  return 1.0 + I * theta * profile_derivative(x);
}

void DistortionSpec::validate(const Grid& grid) const {
  // The closed endpoint pi/4 is admitted for the inverted-parabola identity.
  if (!(theta >= 0.0) || !(theta <= std::numbers::pi / 4))
    throw ValidationError("distortion: theta must lie in [0, pi/4]");
  if (mode == DistortionMode::ExteriorScaling) {
    if (!(inner_radius >= 0.0) || !(inner_radius < outer_radius) || !(outer_radius < grid.half_width))
      throw ValidationError("distortion: need 0 <= R0 < R1 < L for exterior scaling");
  }
}

std::string to_string(DistortionMode mode) {
  return mode == DistortionMode::GlobalRotation ? "global_rotation" : "exterior_scaling";
}

DistortionMode distortion_mode_from_string(const std::string& name) {
  if (name == "global_rotation") return DistortionMode::GlobalRotation;
  if (name == "exterior_scaling") return DistortionMode::ExteriorScaling;
  throw ValidationError("unknown distortion mode '" + name + "'");
}

double DistortedOperator::norm1() const { return column_norm1(matrix); }

double DistortedOperator::cell_volume() const { return std::pow(grid.spacing(), dimension); }

Eigen::SparseMatrix<double> fd_second_derivative(const Grid& grid, int order) {
  const double dx = grid.spacing();
  if (order == 2) return stencil_matrix(grid.points, {1.0, -2.0, 1.0}, 1.0 / (dx * dx));
  if (order == 4) return stencil_matrix(grid.points, {-1.0 / 12, 4.0 / 3, -5.0 / 2, 4.0 / 3, -1.0 / 12}, 1.0 / (dx * dx));
  throw ValidationError("finite-difference order must be 2 or 4");
}

Eigen::SparseMatrix<double> fd_first_derivative(const Grid& grid, int order) {
  const double dx = grid.spacing();
  if (order == 2) return stencil_matrix(grid.points, {-0.5, 0.0, 0.5}, 1.0 / dx);
  if (order == 4) return stencil_matrix(grid.points, {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12}, 1.0 / dx);
  throw ValidationError("finite-difference order must be 2 or 4");
}

DistortedOperator assemble(const Potential& V, double h, const DistortionSpec& spec, const Grid& grid,
                           const AssembleOptions& options) {
  if (!(h > 0.0)) throw ValidationError("assemble: h must be positive");
  if (grid.dimension != V.dimension()) throw ValidationError("assemble: grid and potential dimensions differ");
  if (grid.points < options.min_points)
    throw ValidationError("assemble: grid too coarse (N = " + std::to_string(grid.points) + " < " +
                          std::to_string(options.min_points) + ")");
  if (!(grid.half_width > 0.0)) throw ValidationError("assemble: box half-width must be positive");
  if (options.fd_order != 2 && options.fd_order != 4) throw ValidationError("assemble: fd_order must be 2 or 4");
  spec.validate(grid);
  if (spec.mode == DistortionMode::GlobalRotation && spec.theta != 0.0 &&
      V.analyticity() != Analyticity::EntireDecaying)
    throw ValidationError("assemble: global rotation needs an entire potential (" + V.name() + " is sector-only)");

  DistortedOperator op;
  op.dimension = grid.dimension;
  op.grid = grid;
  op.h = h;
  op.distortion = spec;
  op.fd_order = options.fd_order;
  op.axis = grid.axis();
  for (double x : op.axis) {
    op.mapped_axis.push_back(spec.map(x));
    op.jacobian_axis.push_back(spec.jacobian(x));
  }

  SparseMatrixC K;
  if (spec.mode == DistortionMode::GlobalRotation) {
    K = to_complex(fd_second_derivative(grid, options.fd_order)) * (-h * h * std::exp(-2.0 * I * spec.theta));
  } else {
    K = exterior_kinetic(grid, h, spec, options.fd_order);
  }
  SparseMatrixC A = kronecker_sum(K, grid.dimension);

  const std::size_t M = grid.size();
  const std::size_t N = static_cast<std::size_t>(grid.points);
  op.potential_diagonal.resize(static_cast<Eigen::Index>(M));
  std::vector<Complex> z(static_cast<std::size_t>(grid.dimension));
  for (std::size_t k = 0; k < M; ++k) {
    std::size_t rest = k;
    for (auto& zj : z) {
      zj = op.mapped_axis[rest % N];
      rest /= N;
    }
    bool real = true;
    for (const auto& zj : z) real = real && zj.imag() == 0.0;
    if (real) {
      std::vector<double> xr;
      for (const auto& zj : z) xr.push_back(zj.real());
      op.potential_diagonal(static_cast<Eigen::Index>(k)) = V.value(std::span<const double>(xr));
    } else {
      op.potential_diagonal(static_cast<Eigen::Index>(k)) = V.value(std::span<const Complex>(z));
    }
  }
  SparseMatrixC D(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  std::vector<Triplet> diag;
  diag.reserve(M);
  for (std::size_t k = 0; k < M; ++k)
    diag.emplace_back(k, k, op.potential_diagonal(static_cast<Eigen::Index>(k)));
  D.setFromTriplets(diag.begin(), diag.end());
  op.matrix = A + D;
  op.matrix.makeCompressed();
  return op;
}

DenseEigenResult eigenvalues(const DistortedOperator& op, Complex center, const DenseEigenOptions& options) {
  const std::size_t n = op.size();
  if (n == 0) throw ValidationError("eigenvalues: operator not assembled");
  if (n > options.size_limit)
    throw ValidationError("eigenvalues: matrix size " + std::to_string(n) + " exceeds the dense limit " +
                          std::to_string(options.size_limit));
  const Eigen::MatrixXcd A = Eigen::MatrixXcd(op.matrix);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, options.vectors);
  if (es.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eigenvalues: dense eigensolver did not converge (size " << n << ", ||A||_1 = " << op.norm1() << ")";
    throw NumericalError(os.str());
  }
  std::vector<Eigen::Index> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<Eigen::Index>(i);
  const Eigen::VectorXcd& ev = es.eigenvalues();
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(ev(a) - center) < std::abs(ev(b) - center); });
  DenseEigenResult r;
  r.values.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) r.values(static_cast<Eigen::Index>(i)) = ev(idx[i]);
  if (options.vectors) {
    const double anorm = A.cwiseAbs().colwise().sum().maxCoeff();
    r.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXcd v = es.eigenvectors().col(idx[i]);
      r.vectors.col(static_cast<Eigen::Index>(i)) = v;
      const double res = (A * v - ev(idx[i]) * v).norm() / (std::max(anorm, 1e-300) * v.norm());
      r.max_backward_error = std::max(r.max_backward_error, res);
    }
  }
  return r;
}

std::vector<EigenPair> window_eigenvalues(const DistortedOperator& op, Complex center, double radius,
                                          const WindowEigenOptions& options) {
  if (!(radius > 0.0)) throw ValidationError("window_eigenvalues: radius must be positive");
  const SparseMatrixC& A = op.matrix;
  const Eigen::Index n = A.rows();
  const double anorm = std::max(op.norm1(), 1e-300);

  SparseLUC lu;
  lu.compute(shifted(A, center));
  if (lu.info() != Eigen::Success) {
    // The shift sits on an eigenvalue; nudge it off.
    center += Complex(1e-9, 1e-9) * std::max(1.0, std::abs(center));
    lu.compute(shifted(A, center));
    if (lu.info() != Eigen::Success) throw NumericalError("window_eigenvalues: sparse LU failed");
  }

  const int m_max = static_cast<int>(std::min<Eigen::Index>(options.max_krylov, n));
  Eigen::MatrixXcd Q(n, m_max + 1);
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m_max + 1, m_max);
  Q.col(0) = random_vector(n, options.seed);

  std::uint64_t restart_seed = options.seed;
  int m = 0;
  int next_check = std::min(options.initial_krylov, m_max);
  while (true) {
    for (; m < next_check; ++m) {
      Eigen::VectorXcd w = lu.solve(Q.col(m));
      if (lu.info() != Eigen::Success) throw NumericalError("window_eigenvalues: LU solve failed");
      // Classical Gram-Schmidt, applied twice.
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXcd c = Q.leftCols(m + 1).adjoint() * w;
        w -= Q.leftCols(m + 1) * c;
        H.col(m).head(m + 1) += c;
      }
      const double beta = w.norm();
      H(m + 1, m) = beta;
      if (beta > 1e-12 * H.col(m).head(m + 1).norm()) {
        Q.col(m + 1) = w / beta;
      } else {
        // Invariant subspace: continue with a fresh direction.
        H(m + 1, m) = 0.0;
        Eigen::VectorXcd r = random_vector(n, ++restart_seed);
        for (int pass = 0; pass < 2; ++pass) r -= Q.leftCols(m + 1) * (Q.leftCols(m + 1).adjoint() * r);
        Q.col(m + 1) = r.normalized();
      }
    }

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(m, m), true);
    if (es.info() != Eigen::Success) throw NumericalError("window_eigenvalues: Ritz eigensolver failed");

    std::vector<EigenPair> inside;
    bool all_inside_converged = true;
    int outside_converged = 0;
    for (int k = 0; k < m; ++k) {
      const Complex mu = es.eigenvalues()(k);
      if (std::abs(mu) < 1e-300) continue;
      const Complex z = center + 1.0 / mu;
      const Eigen::VectorXcd x = Q.leftCols(m) * es.eigenvectors().col(k);
      const double res = (A * x - z * x).norm() / (anorm * x.norm());
      const bool converged = res <= options.tolerance;
      if (std::abs(z - center) < radius) {
        if (converged) inside.push_back({z, res});
        else all_inside_converged = false;
      } else if (converged) {
        ++outside_converged;
      }
    }
    const bool exhausted = m >= n;
    if ((all_inside_converged && outside_converged >= options.guard) || exhausted) {
      std::sort(inside.begin(), inside.end(), [&](const EigenPair& a, const EigenPair& b) {
        return std::abs(a.z - center) < std::abs(b.z - center);
      });
      // Ritz values from a restarted direction can duplicate converged ones.
      std::vector<EigenPair> unique;
      for (const auto& p : inside) {
        bool dup = false;
        for (const auto& q : unique) dup = dup || std::abs(p.z - q.z) <= 1e-9 * std::max(1.0, std::abs(p.z));
        if (!dup) unique.push_back(p);
      }
      return unique;
    }
    if (m >= m_max) {
      std::ostringstream os;
      os << "window_eigenvalues: Krylov dimension " << m_max << " reached before the disk |z - (" << center.real()
         << (center.imag() < 0 ? " - " : " + ") << std::abs(center.imag()) << "i)| < " << radius << " converged";
      throw NumericalError(os.str());
    }
    next_check = std::min(m_max, 2 * m);
  }
}

double ThetaPolicy::theta_for(double h) const {
  if (kind == Kind::Fixed) return value;
  return h * std::abs(std::log(h));
}

DistortionSpec SpectralConfig::distortion_for(double h) const {
  DistortionSpec s;
  s.mode = mode;
  s.theta = theta.theta_for(h);
  s.inner_radius = inner_radius;
  s.outer_radius = outer_radius;
  return s;
}

std::vector<Complex> ResonanceSet::values() const {
  std::vector<Complex> out;
  out.reserve(resonances.size());
  for (const auto& r : resonances) out.push_back(r.z);
  return out;
}

ResonanceSet resonances(const Potential& V, double E0, double h, double C, const SpectralConfig& config) {
  if (!(C > 0.0)) throw ValidationError("resonances: C must be positive");
  const StabilityConfig& st = config.stability;
  if (!(st.eta > 0.0)) throw ValidationError("resonances: eta must be positive");
  if (!(st.refine_factor > 1.0)) throw ValidationError("resonances: refine_factor must exceed 1");

  const DistortionSpec base = config.distortion_for(h);
  DistortionSpec perturbed = base;
  perturbed.theta = base.theta * (1.0 + st.eta);
  if (!(perturbed.theta < std::numbers::pi / 4))
    throw ValidationError("resonances: theta (1 + eta) must stay below pi/4");
  Grid fine = config.grid;
  fine.points = static_cast<int>(std::ceil(st.refine_factor * config.grid.points));

  const double radius = C * h;
  const double stab_tol = st.stab_tol * h;
  // Partners may sit just outside the window.
  const double outer = radius + 10.0 * stab_tol;

  auto window = [&](const DistortionSpec& spec, const Grid& grid) {
    const DistortedOperator op = assemble(V, h, spec, grid, config.assemble);
    std::vector<Complex> z;
    for (const auto& p : window_eigenvalues(op, E0, outer, config.window)) z.push_back(p.z);
    return z;
  };
  const std::vector<Complex> z_base = window(base, config.grid);
  const std::vector<Complex> z_theta = window(perturbed, config.grid);
  const std::vector<Complex> z_grid = window(base, fine);

  auto nearest = [](Complex z, const std::vector<Complex>& set) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& w : set) d = std::min(d, std::abs(w - z));
    return d;
  };

  ResonanceSet rs;
  rs.h = h;
  rs.theta = base.theta;
  rs.E0 = E0;
  rs.C = C;
  std::vector<Resonance> kept;
  for (const auto& z : z_base) {
    if (!(std::abs(z - E0) < radius)) continue;
    ++rs.base_count;
    Resonance r;
    r.z = z;
    r.theta_shift = nearest(z, z_theta);
    r.grid_shift = nearest(z, z_grid);
    if (z.imag() <= st.imag_tol * h && r.theta_shift <= stab_tol && r.grid_shift <= stab_tol) kept.push_back(r);
    else rs.rejected.push_back(z);
  }

  std::sort(kept.begin(), kept.end(), [](const Resonance& a, const Resonance& b) {
    return std::abs(a.z.imag()) < std::abs(b.z.imag());
  });
  std::vector<bool> used(kept.size(), false);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (used[i]) continue;
    Resonance agg = kept[i];
    Complex sum = kept[i].z;
    used[i] = true;
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      if (used[j] || std::abs(kept[j].z - kept[i].z) > st.cluster_tol * h) continue;
      used[j] = true;
      sum += kept[j].z;
      agg.theta_shift = std::max(agg.theta_shift, kept[j].theta_shift);
      agg.grid_shift = std::max(agg.grid_shift, kept[j].grid_shift);
      ++agg.cluster;
    }
    agg.z = sum / static_cast<double>(agg.cluster);
    rs.resonances.push_back(agg);
  }
  return rs;
}

double cutoff(double r, double radius) {
  if (r <= radius) return 1.0;
  if (r >= 2.0 * radius) return 0.0;
  return smoothstep(2.0 - r / radius);
}

ResolventEstimate resolvent_probe(const DistortedOperator& op, Complex z, double cutoff_radius,
                                  const ProbeOptions& options) {
  if (!(cutoff_radius > 0.0)) throw ValidationError("resolvent_probe: cutoff radius must be positive");
  const Eigen::Index n = op.matrix.rows();
  const int dim = op.dimension;
  const std::size_t N = static_cast<std::size_t>(op.grid.points);
  if (options.center.size() != 0 && options.center.size() != dim)
    throw ValidationError("resolvent_probe: cutoff center dimension mismatch");

  Eigen::VectorXd chi(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::size_t rest = static_cast<std::size_t>(k);
    double r2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double c = options.center.size() ? options.center(d) : 0.0;
      const double x = op.axis[rest % N] - c;
      r2 += x * x;
      rest /= N;
    }
    chi(k) = cutoff(std::sqrt(r2), cutoff_radius);
  }

  ResolventEstimate est;
  SparseLUC lu;
  lu.compute(shifted(op.matrix, z));
  if (lu.info() != Eigen::Success) {
    est.at_resonance = true;
    est.norm = std::numeric_limits<double>::infinity();
    return est;
  }

  Eigen::VectorXcd v = random_vector(n, options.seed);
  double sigma = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    // w = M* M v with M = chi (A - z)^{-1} chi.
    Eigen::VectorXcd w = chi.cwiseProduct(v);
    w = lu.solve(w);
    w = chi.cwiseProduct(w);
    const double mv = w.norm();
    w = chi.cwiseProduct(w);
    w = lu.adjoint().solve(w);
    w = chi.cwiseProduct(w);
    const double wn = w.norm();
    est.iterations = it;
    if (!std::isfinite(wn) || !std::isfinite(mv)) {
      est.at_resonance = true;
      est.norm = std::numeric_limits<double>::infinity();
      return est;
    }
    if (wn == 0.0) {
      est.norm = 0.0;
      est.converged = true;
      return est;
    }
    const double next = std::sqrt(wn);
    v = w / wn;
    if (it > 1 && std::abs(next - sigma) <= options.tolerance * next) {
      sigma = next;
      est.converged = true;
      break;
    }
    sigma = std::max(next, mv);
  }
  est.norm = sigma;
  // Relative to roundoff the estimate is effectively infinite.
  if (sigma * std::max(op.norm1(), 1.0) > 1e14) est.at_resonance = true;
  return est;
}

ResonantVector resonant_vector(const DistortedOperator& op, Complex z, const InverseIterationOptions& options) {
  const SparseMatrixC& A = op.matrix;
  const Eigen::Index n = A.rows();
  const double scale = std::max(1.0, op.norm1());

  SparseLUC lu;
  lu.compute(shifted(A, z));
  if (lu.info() != Eigen::Success) {
    z += Complex(1e-12, 1e-12) * std::max(1.0, std::abs(z));
    lu.compute(shifted(A, z));
    if (lu.info() != Eigen::Success) throw NumericalError("resonant_vector: sparse LU failed");
  }

  ResonantVector rv;
  Eigen::VectorXcd v = random_vector(n, options.seed);
  std::vector<Complex> history;
  for (int it = 1; it <= options.max_iterations; ++it) {
    Eigen::VectorXcd w = lu.solve(v);
    v = w.normalized();
    const Eigen::VectorXcd Av = A * v;
    const Complex mu = v.dot(Av);
    rv.residual = (Av - mu * v).norm() / scale;
    rv.eigenvalue = mu;
    rv.iterations = it;
    history.push_back(mu);
    if (rv.residual <= options.tolerance) break;
  }
  if (rv.residual > options.tolerance) {
    std::ostringstream os;
    os << std::setprecision(10) << "resonant_vector: no convergence after " << options.max_iterations
       << " iterations (residual " << rv.residual << "); last Rayleigh quotients";
    for (std::size_t k = history.size() > 3 ? history.size() - 3 : 0; k < history.size(); ++k)
      os << " " << history[k].real() << (history[k].imag() < 0 ? "-" : "+") << std::abs(history[k].imag()) << "i";
    os << " suggest a cluster near the shift";
    throw NumericalError(os.str());
  }

  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  v *= std::abs(v(imax)) / v(imax);
  v /= std::sqrt(op.cell_volume());
  rv.u = v;
  return rv;
}

void write_matrix_market(const DistortedOperator& op, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << "%%MatrixMarket matrix coordinate complex general\n";
  out << op.matrix.rows() << " " << op.matrix.cols() << " " << op.matrix.nonZeros() << "\n";
  out << std::setprecision(17);
  for (Eigen::Index k = 0; k < op.matrix.outerSize(); ++k)
    for (SparseMatrixC::InnerIterator it(op.matrix, k); it; ++it)
      out << it.row() + 1 << " " << it.col() + 1 << " " << it.value().real() << " " << it.value().imag() << "\n";
}

}  // namespace resolab
