#include "resolab/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "resolab/parallel.hpp"

namespace resolab {

double hamiltonian(const Potential& V, const Eigen::VectorXd& x, const Eigen::VectorXd& xi) {
  return xi.squaredNorm() + V.value(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

namespace {

Eigen::VectorXd grad(const Potential& V, const Eigen::VectorXd& x) {
  return V.gradient(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

double phase_radius(const Eigen::VectorXd& x, const Eigen::VectorXd& xi, const Eigen::VectorXd& center) {
  const double dx2 = center.size() == 0 ? x.squaredNorm() : (x - center).squaredNorm();
  return std::sqrt(dx2 + xi.squaredNorm());
}

}  // namespace

Trajectory flow(const Potential& V, const Eigen::VectorXd& x0, const Eigen::VectorXd& xi0, double T,
                double dt, const FlowOptions& options) {
  if (!(dt > 0.0)) throw ValidationError("flow: dt must be positive");
  if (x0.size() != V.dimension() || xi0.size() != V.dimension())
    throw ValidationError("flow: initial point dimension does not match the potential");
  if (options.record_stride < 1) throw ValidationError("flow: record_stride must be >= 1");

  const long steps = std::lround(std::abs(T) / dt);
  const double h = (T < 0.0 ? -1.0 : 1.0) * dt;
  Trajectory tr;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd xi = xi0;
  const double p0 = hamiltonian(V, x, xi);
  auto record = [&](double t, double energy) {
    tr.t.push_back(t);
    tr.x.push_back(x);
    tr.xi.push_back(xi);
    tr.energy.push_back(energy);
  };
  record(0.0, p0);

  Eigen::VectorXd g = grad(V, x);
  for (long k = 1; k <= steps; ++k) {
    xi -= 0.5 * h * g;
    x += 2.0 * h * xi;
    g = grad(V, x);
    xi -= 0.5 * h * g;
    const double t = static_cast<double>(k) * h;
    const double energy = hamiltonian(V, x, xi);
    tr.max_energy_drift = std::max(tr.max_energy_drift, std::abs(energy - p0));
    const bool out = phase_radius(x, xi, options.box_center) > options.box_radius;
    if (out || k == steps || k % options.record_stride == 0) record(t, energy);
    if (out) {
      tr.escaped = true;
      tr.escape_time = std::abs(t);
      break;
    }
  }
  return tr;
}

TrappedReport trapped_diagnostic(const Potential& V, double E0, double shell_radius, double T_max,
                                 int samples, std::uint64_t seed, const TrappedOptions& options) {
  TrappedReport report;
  report.requested = std::max(samples, 0);
  if (samples <= 0) return report;
  if (!(shell_radius > 0.0)) throw ValidationError("trapped_diagnostic: shell_radius must be positive");
  if (!(T_max > 0.0)) throw ValidationError("trapped_diagnostic: T_max must be positive");

  const int n = V.dimension();
  const Eigen::VectorXd center = options.center.size() == 0 ? Eigen::VectorXd::Zero(n) : options.center;
  const double r_min = options.r_min_fraction * shell_radius;

  // Draw sequentially so the sample set depends on the seed only.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> points;
  const long max_attempts = static_cast<long>(options.max_attempts_per_sample) * samples;
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(points.size()) < samples; ++attempt) {
    Eigen::VectorXd x(n);
    Eigen::VectorXd dir(n);
    if (n == 1) {
      x(0) = shell_radius * (2.0 * unit(rng) - 1.0);
      dir(0) = unit(rng) < 0.5 ? -1.0 : 1.0;
    } else {
      const double r = shell_radius * std::sqrt(unit(rng));
      const double a = 2.0 * std::numbers::pi * unit(rng);
      const double b = 2.0 * std::numbers::pi * unit(rng);
      x << r * std::cos(a), r * std::sin(a);
      dir << std::cos(b), std::sin(b);
    }
    x += center;
    const double k2 = E0 - V.value(std::span<const double>(x.data(), static_cast<std::size_t>(n)));
    if (k2 < 0.0) {
      ++report.rejected;
      continue;
    }
    const Eigen::VectorXd xi = std::sqrt(k2) * dir;
    const double rho = phase_radius(x, xi, center);
    if (rho < r_min || rho > shell_radius) {
      ++report.rejected;
      continue;
    }
    points.emplace_back(x, xi);
  }

  struct Outcome {
    double forward = std::numeric_limits<double>::infinity();
    double backward = std::numeric_limits<double>::infinity();
  };
  std::vector<Outcome> outcomes(points.size());
  FlowOptions fo;
  fo.box_radius = options.box_factor * shell_radius;
  fo.box_center = center;
  fo.record_stride = std::numeric_limits<int>::max();
  parallel_for(points.size(), options.jobs, [&](std::size_t i) {
    const auto& [x, xi] = points[i];
    const Trajectory fwd = flow(V, x, xi, T_max, options.dt, fo);
    const Trajectory bwd = flow(V, x, xi, -T_max, options.dt, fo);
    if (fwd.escaped) outcomes[i].forward = fwd.escape_time;
    if (bwd.escaped) outcomes[i].backward = bwd.escape_time;
  });

  report.evaluated = static_cast<int>(points.size());
  for (const auto& o : outcomes) {
    const bool fwd = std::isfinite(o.forward);
    const bool bwd = std::isfinite(o.backward);
    // Trapped means bounded in both time directions over [-T_max, T_max].
    if (!fwd && !bwd) ++report.trapped;
    if (fwd) report.min_escape_forward = std::min(report.min_escape_forward, o.forward);
    if (bwd) report.min_escape_backward = std::min(report.min_escape_backward, o.backward);
    if (fwd && bwd) report.max_escape_time = std::max({report.max_escape_time, o.forward, o.backward});
  }
  if (report.evaluated > 0)
    report.trapped_fraction = static_cast<double>(report.trapped) / report.evaluated;
  return report;
}

TaylorPhase::TaylorPhase(int sign, Series coefficients, Eigen::VectorXd lambda, Eigen::VectorXd center,
                         Eigen::MatrixXd axes, double energy)
    : sign_(sign),
      coeffs_(std::move(coefficients)),
      lambda_(std::move(lambda)),
      center_(std::move(center)),
      axes_(std::move(axes)),
      energy_(energy) {
  const int n = coeffs_.nvars();
  laplacian_ = Series(n, coeffs_.order());
  for (int j = 0; j < n; ++j) {
    grad_.push_back(coeffs_.derivative(j));
    laplacian_ += grad_.back().derivative(j);
  }
}

Eigen::VectorXd TaylorPhase::local(const Eigen::VectorXd& x) const { return axes_.transpose() * (x - center_); }

std::complex<double> TaylorPhase::value(std::span<const std::complex<double>> y) const {
  return coeffs_.evaluate(y);
}

std::vector<std::complex<double>> TaylorPhase::gradient(std::span<const std::complex<double>> y) const {
  std::vector<std::complex<double>> g;
  g.reserve(grad_.size());
  for (const auto& d : grad_) g.push_back(d.evaluate(y));
  return g;
}

std::complex<double> TaylorPhase::laplacian(std::span<const std::complex<double>> y) const {
  return laplacian_.evaluate(y);
}

double TaylorPhase::value(double y) const { return coeffs_.evaluate(std::span<const double>(&y, 1)); }

double TaylorPhase::derivative(double y) const { return grad_[0].evaluate(std::span<const double>(&y, 1)); }

double TaylorPhase::eikonal_residual(const Potential& V, const Eigen::VectorXd& x) const {
  const Eigen::VectorXd y = local(x);
  std::vector<double> yy(y.data(), y.data() + y.size());
  // grad_x phi = axes * grad_y phi; axes is orthogonal so the norms agree.
  double g2 = 0.0;
  for (const auto& d : grad_) {
    const double gj = d.evaluate(std::span<const double>(yy));
    g2 += gj * gj;
  }
  return g2 + V.value(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))) - energy_;
}

TaylorPhase eikonal_taylor(const Potential& V, const BarrierData& bd, int sign, int K) {
  if (sign != 1 && sign != -1) throw ValidationError("eikonal_taylor: sign must be +1 or -1");
  if (K < 2) throw ValidationError("eikonal_taylor: order K must be >= 2");
  const int n = bd.dimension();
  if (n != V.dimension()) throw ValidationError("eikonal_taylor: barrier data dimension mismatch");

  const Series v = V.taylor(std::span<const double>(bd.critical_point.data(), static_cast<std::size_t>(n)),
                            K, &bd.axes);
  Series phi(n, K);
  for (int j = 0; j < n; ++j) {
    MultiIndex e(static_cast<std::size_t>(n), 0);
    e[static_cast<std::size_t>(j)] = 2;
    phi[e] = sign * bd.lambda(j) / 4.0;
  }
  for (int m = 3; m <= K; ++m) {
    Series residual = v - bd.energy;
    for (int j = 0; j < n; ++j) {
      const Series d = phi.derivative(j);
      residual += d * d;
    }
    // Homological equation: (sign * lambda . alpha) c_alpha = -residual_alpha.
    for_each_multi_index(n, m, [&](const MultiIndex& alpha) {
      if (total_degree(alpha) != m) return;
      double weight = 0.0;
      for (int j = 0; j < n; ++j) weight += bd.lambda(j) * alpha[static_cast<std::size_t>(j)];
      weight *= sign;
      if (weight == 0.0) throw NumericalError("eikonal_taylor: vanishing homological weight lambda . alpha");
      phi[alpha] = -residual[alpha] / weight;
    });
  }
  return TaylorPhase(sign, std::move(phi), bd.lambda, bd.critical_point, bd.axes, bd.energy);
}

Eigen::MatrixXd Linearization::projection(double mu, double tol) const {
  const int m = static_cast<int>(eigenvalues.size());
  Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    if (std::abs(eigenvalues(i) - mu) <= tol) sel(i, i) = 1.0;
  return eigenvectors * sel * inverse_eigenvectors;
}

Linearization linearize(const BarrierData& bd) {
  const int n = bd.dimension();
  Linearization lin;
  lin.F = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) {
    lin.F(j, n + j) = 2.0;
    lin.F(n + j, j) = 0.5 * bd.lambda(j) * bd.lambda(j);
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(lin.F);
  if (es.info() != Eigen::Success) throw NumericalError("linearize: eigensolver failed");
  std::vector<std::pair<double, Eigen::VectorXd>> pairs;
  for (int i = 0; i < 2 * n; ++i) {
    // F is real with real spectrum +-lambda_j; imaginary parts are roundoff.
    pairs.emplace_back(es.eigenvalues()(i).real(), es.eigenvectors().col(i).real().normalized());
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  lin.eigenvalues.resize(2 * n);
  lin.eigenvectors.resize(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    lin.eigenvalues(i) = pairs[static_cast<std::size_t>(i)].first;
    lin.eigenvectors.col(i) = pairs[static_cast<std::size_t>(i)].second;
  }
  lin.inverse_eigenvectors = lin.eigenvectors.inverse();
  return lin;
}

}  // namespace resolab
