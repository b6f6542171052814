#include "resolab/wkb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace resolab {

namespace {

constexpr Complex I{0.0, 1.0};

/// Fourth-order central first and second differences at index i with step `s` points.
Complex d1(const std::vector<Complex>& f, std::size_t i, std::size_t s, double dx) {
  return (-f[i + 2 * s] + 8.0 * f[i + s] - 8.0 * f[i - s] + f[i - 2 * s]) / (12.0 * dx);
}

Complex d2(const std::vector<Complex>& f, std::size_t i, std::size_t s, double dx) {
  return (-f[i + 2 * s] + 16.0 * f[i + s] - 30.0 * f[i] + 16.0 * f[i - s] - f[i - 2 * s]) / (12.0 * dx * dx);
}

struct Window {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
};

/// Grid indices with |x - c| <= r widened by `margin` points; throws when the grid is too short.
Window neighborhood(const std::vector<double>& axis, double c, double r, int margin) {
  std::size_t lo = axis.size();
  std::size_t hi = 0;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (std::abs(axis[i] - c) <= r) {
      lo = std::min(lo, i);
      hi = std::max(hi, i);
    }
  }
  if (lo > hi) throw ValidationError("neighborhood |x - x*| <= r contains no grid point");
  const auto m = static_cast<std::size_t>(margin);
  if (lo < m || hi + m >= axis.size()) throw ValidationError("grid does not cover the neighborhood plus stencil margin");
  return {lo - m, hi + m};
}

void check_phase(const TaylorPhase& phase) {
  if (phase.dimension() != 1) throw ValidationError("symbol work is implemented for one dimension");
}

/// Local phase coordinate, dy/dx and d^2y/dx^2 at grid point x.
struct LocalMap {
  Complex y, g, dg;
};

LocalMap local_map(double x, const DistortionSpec& spec, const TaylorPhase& phase, Unrotation mode) {
  const double s = phase.axes()(0, 0);
  const double c = phase.center()(0);
  if (mode == Unrotation::SmallTheta) return {s * (x - c), s, 0.0};
  const Complex dg = spec.mode == DistortionMode::ExteriorScaling
                         ? I * spec.theta * spec.profile_second_derivative(x)
                         : Complex{};
  return {s * (spec.map(x) - c), s * spec.jacobian(x), s * dg};
}

/// s / (c - i delta).
DeltaSeries divide_linear(const DeltaSeries& s, double c) {
  DeltaSeries q(s.size());
  Complex prev{};
  for (std::size_t n = 0; n < s.size(); ++n) {
    q[n] = (s[n] + I * prev) / c;
    prev = q[n];
  }
  return q;
}

}  // namespace

std::vector<Complex> WKBState::reconstruct() const {
  std::vector<Complex> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Complex yy = y[i];
    out[i] = std::exp(I * phase.value(std::span<const Complex>(&yy, 1)) / h) * a[i] / scale;
  }
  return out;
}

WKBState extract_symbol(const std::vector<double>& axis, const Eigen::VectorXcd& u, const DistortionSpec& spec,
                        const TaylorPhase& phase, double h, Complex z, const SymbolOptions& options) {
  check_phase(phase);
  if (!(h > 0.0)) throw ValidationError("extract_symbol: h must be positive");
  if (!(options.radius > 0.0)) throw ValidationError("extract_symbol: radius must be positive");
  if (static_cast<std::size_t>(u.size()) != axis.size())
    throw ValidationError("extract_symbol: state and grid sizes differ");
  if (options.mode == Unrotation::SmallTheta && spec.theta > options.small_theta_max)
    throw ValidationError("extract_symbol: small-theta mode needs theta <= small_theta_max");

  WKBState st;
  st.h = h;
  st.z = z;
  st.theta = spec.theta;
  st.mode = options.mode;
  st.unrotation_error = options.mode == Unrotation::SmallTheta ? spec.theta : 0.0;
  st.radius = options.radius;
  st.spacing = axis.size() > 1 ? axis[1] - axis[0] : 0.0;
  st.phase = phase;

  const Window w = neighborhood(axis, phase.center()(0), options.radius, st.margin);
  double global_max = u.cwiseAbs().maxCoeff();
  double local_max = 0.0;
  for (std::size_t i = w.first; i <= w.last; ++i) {
    const LocalMap m = local_map(axis[i], spec, phase, options.mode);
    st.x.push_back(axis[i]);
    st.y.push_back(m.y);
    st.g.push_back(m.g);
    st.dg.push_back(m.dg);
    const Complex ui = u(static_cast<Eigen::Index>(i));
    st.u.push_back(ui);
    st.a.push_back(std::exp(-I * phase.value(std::span<const Complex>(&m.y, 1)) / h) * ui);
  }
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (!st.inside(i)) continue;
    local_max = std::max(local_max, std::abs(st.u[i]));
    st.raw_max = std::max(st.raw_max, std::abs(st.a[i]));
  }
  if (!(local_max > 1e-12 * global_max) || st.raw_max == 0.0)
    throw NumericalError("extract_symbol: state vanishes near the barrier top (not microlocalized there)");
  st.scale = 1.0 / st.raw_max;
  for (auto& ai : st.a) ai *= st.scale;
  return st;
}

WKBState extract_symbol(const DistortedOperator& op, const Eigen::VectorXcd& u, const TaylorPhase& phase, Complex z,
                        const SymbolOptions& options) {
  if (op.dimension != 1) throw ValidationError("symbol work is implemented for one dimension");
  return extract_symbol(op.axis, u, op.distortion, phase, op.h, z, options);
}

TransportReport transport_residual(const WKBState& state, Complex z, double E0, double h,
                                   const TransportOptions& options) {
  if (!(h > 0.0)) throw ValidationError("transport_residual: h must be positive");
  if (state.size() < static_cast<std::size_t>(2 * state.margin + 1))
    throw ValidationError("transport_residual: state has no interior samples");
  const Complex shift = I * (z - E0) / h;

  auto residual = [&](std::size_t stride) {
    const double dx = state.spacing * static_cast<double>(stride);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < state.size(); ++i) {
      if (!state.inside(i)) continue;
      const Complex ax = d1(state.a, i, stride, dx);
      const Complex axx = d2(state.a, i, stride, dx);
      const Complex ay = ax / state.g[i];
      const Complex ayy = (axx - state.dg[i] * ay) / (state.g[i] * state.g[i]);
      const Complex yy = state.y[i];
      const Complex p1 = state.phase.gradient(std::span<const Complex>(&yy, 1))[0];
      const Complex p2 = state.phase.laplacian(std::span<const Complex>(&yy, 1));
      const Complex R = 2.0 * p1 * ay + (p2 - shift) * state.a[i] - I * h * ayy;
      num += std::norm(R);
      den += std::norm(state.a[i]);
    }
    return std::sqrt(num / den);
  };

  TransportReport rep;
  rep.residual = residual(1);
  // The stride-2 stencil reaches 4 points out, which the margin covers.
  rep.coarse_residual = residual(2);
  if (options.check_coarse && rep.coarse_residual > options.roundoff_floor &&
      std::abs(rep.coarse_residual - rep.residual) > options.coarse_tolerance * rep.residual) {
    std::ostringstream os;
    os << "transport_residual: grid too coarse at h = " << h << " (residual " << rep.residual << " vs "
       << rep.coarse_residual << " on the 2 dx sub-grid)";
    throw NumericalError(os.str());
  }
  return rep;
}

AnnihilationReport annihilation_check(double h, Complex z, const AnnihilationGrid& grid) {
  if (!(h > 0.0)) throw ValidationError("annihilation_check: h must be positive");
  // The z terms cancel exactly; extended precision keeps their rounding below the residual.
  using CL = std::complex<long double>;
  using SparseL = Eigen::SparseMatrix<CL>;
  using VectorL = Eigen::Matrix<CL, Eigen::Dynamic, 1>;
  const Grid g{1, grid.points, grid.half_width};
  const int n = grid.points;
  const std::vector<double> x = g.axis();
  const long double hl = h;
  const CL zl(z.real(), z.imag());
  const CL il(0.0L, 1.0L);

  SparseL X(n, n), X2(n, n), Id(n, n);
  {
    std::vector<Eigen::Triplet<CL>> t1, t2, t3;
    for (int i = 0; i < n; ++i) {
      const long double xi = x[static_cast<std::size_t>(i)];
      t1.emplace_back(i, i, xi);
      t2.emplace_back(i, i, xi * xi);
      t3.emplace_back(i, i, 1.0L);
    }
    X.setFromTriplets(t1.begin(), t1.end());
    X2.setFromTriplets(t2.begin(), t2.end());
    Id.setFromTriplets(t3.begin(), t3.end());
  }
  const SparseL D1 = fd_first_derivative(g, grid.fd_order).cast<CL>();
  const SparseL D2 = fd_second_derivative(g, grid.fd_order).cast<CL>();
  const SparseL A = (-il * hl) * D1 - X;
  const SparseL P = (-hl * hl) * D2 - X2;
  const SparseL left = P - zl * Id;
  const SparseL right = P - (2.0L * il * hl + zl) * Id;

  const int edge = grid.fd_order;
  auto interior_norm = [&](const VectorL& v) {
    long double s = 0.0L;
    for (int i = edge; i < n - edge; ++i) s += std::norm(v(i));
    return std::sqrt(s);
  };

  AnnihilationReport rep;
  rep.spacing = g.spacing();
  for (int k = 0; k < grid.family_count; ++k) {
    VectorL f(n);
    for (int i = 0; i < n; ++i) {
      const long double xi = x[static_cast<std::size_t>(i)];
      const long double w = grid.family_width;
      f(i) = std::pow(xi, k) * std::exp(-xi * xi / (2.0L * w * w));
    }
    const VectorL lhs = A * (left * f);
    const VectorL rhs = right * (A * f);
    const VectorL Pf = P * f;
    rep.residual = std::max(rep.residual, static_cast<double>(interior_norm(lhs - rhs) / interior_norm(Pf)));
  }

  const SparseL R = SparseL(A * left) - SparseL(right * A);
  std::vector<long double> colsum(static_cast<std::size_t>(n), 0.0L), pcol(static_cast<std::size_t>(n), 0.0L);
  for (Eigen::Index k = 0; k < R.outerSize(); ++k)
    for (SparseL::InnerIterator it(R, k); it; ++it)
      if (it.row() >= edge && it.row() < n - edge) colsum[static_cast<std::size_t>(it.col())] += std::abs(it.value());
  for (Eigen::Index k = 0; k < P.outerSize(); ++k)
    for (SparseL::InnerIterator it(P, k); it; ++it) pcol[static_cast<std::size_t>(it.col())] += std::abs(it.value());
  rep.operator_residual = static_cast<double>(*std::max_element(colsum.begin(), colsum.end()) /
                                              *std::max_element(pcol.begin(), pcol.end()));
  return rep;
}

DecayTable annihilation_decay(const std::vector<double>& axis, const Eigen::VectorXcd& u, const DistortionSpec& spec,
                              const TaylorPhase& phase, double h, int m_max, double radius) {
  check_phase(phase);
  if (m_max < 0) throw ValidationError("annihilation_decay: m_max must be >= 0");
  if (!(h > 0.0) || !(radius > 0.0)) throw ValidationError("annihilation_decay: h and radius must be positive");
  if (static_cast<std::size_t>(u.size()) != axis.size())
    throw ValidationError("annihilation_decay: state and grid sizes differ");

  // Each application spoils two points at either end of the window.
  const int margin = 2 * m_max + 2;
  const Window w = neighborhood(axis, phase.center()(0), radius, margin);
  const std::size_t len = w.last - w.first + 1;
  const double dx = axis[1] - axis[0];
  std::vector<Complex> v(len), g(len), p1(len);
  for (std::size_t i = 0; i < len; ++i) {
    const LocalMap m = local_map(axis[w.first + i], spec, phase, Unrotation::Exact);
    v[i] = u(static_cast<Eigen::Index>(w.first + i));
    g[i] = m.g;
    p1[i] = phase.gradient(std::span<const Complex>(&m.y, 1))[0];
  }
  const auto inner_norm = [&](const std::vector<Complex>& f) {
    double s = 0.0;
    for (std::size_t i = static_cast<std::size_t>(margin); i + static_cast<std::size_t>(margin) < len; ++i)
      s += std::norm(f[i]);
    return std::sqrt(s);
  };

  DecayTable t;
  t.h = h;
  const double base = inner_norm(v);
  if (base == 0.0) throw NumericalError("annihilation_decay: state vanishes on the neighborhood");
  t.norms.push_back(1.0);
  for (int m = 1; m <= m_max; ++m) {
    std::vector<Complex> next(len, Complex{});
    for (std::size_t i = 2; i + 2 < len; ++i) next[i] = -I * h * d1(v, i, 1, dx) / g[i] - p1[i] * v[i];
    v = std::move(next);
    t.norms.push_back(inner_norm(v) / base);
  }
  return t;
}

DecayTable annihilation_decay(const DistortedOperator& op, const Eigen::VectorXcd& u, const TaylorPhase& phase,
                              int m_max, double radius) {
  if (op.dimension != 1) throw ValidationError("symbol work is implemented for one dimension");
  return annihilation_decay(op.axis, u, op.distortion, phase, op.h, m_max, radius);
}

Complex ExpansionResult::evaluate_G(Complex sigma, double h) const {
  Complex total{};
  double hk = 1.0;
  for (const auto& gk : G) {
    Complex s{};
    Complex dn = 1.0;
    for (const auto& c : gk) {
      s += c * dn;
      dn *= sigma - sigma0;
    }
    total += hk * s;
    hk *= h;
  }
  return total;
}

Complex ExpansionResult::sigma_at(double h) const {
  Complex s{};
  double hm = 1.0;
  for (const auto& c : sigma) {
    s += c * hm;
    hm *= h;
  }
  return s;
}

Complex ExpansionResult::z_at(double h) const {
  Complex s{};
  double hk = 1.0;
  for (const auto& c : E) {
    s += c * hk;
    hk *= h;
  }
  return s;
}

ExpansionResult taylor_recurrence(const Potential& V, const BarrierData& bd, const MultiIndex& alpha0, int K) {
  const int n = bd.dimension();
  if (n < 1 || n > 2) throw ValidationError("taylor_recurrence: dimension must be 1 or 2");
  if (static_cast<int>(alpha0.size()) != n) throw ValidationError("taylor_recurrence: alpha0 has the wrong length");
  if (K < 1) throw ValidationError("taylor_recurrence: order K must be >= 1");
  std::vector<double> lambda(bd.lambda.data(), bd.lambda.data() + n);
  if (!is_simple(alpha0, lambda)) throw ValidationError("taylor_recurrence: alpha0 is not simple");

  const int d0 = total_degree(alpha0);
  auto bound = [&](int k) { return d0 + 2 * (K - k) + 2; };
  const int phase_order = bound(0) + 1;
  if (phase_order > Potential::kMaxTaylorOrder)
    throw ValidationError("taylor_recurrence: insufficient Taylor order of V for this K and alpha0");

  const TaylorPhase phase = eikonal_taylor(V, bd, 1, phase_order);
  std::vector<Series> grad;
  Series lap(n, phase_order);
  for (int j = 0; j < n; ++j) {
    grad.push_back(phase.coefficients().derivative(j));
    lap += grad.back().derivative(j);
  }

  ExpansionResult ex;
  ex.alpha0 = alpha0;
  ex.E0 = bd.energy;
  ex.lambda = lambda;
  ex.order = K;
  double level = 0.0;
  for (int j = 0; j < n; ++j) level += lambda[static_cast<std::size_t>(j)] * (alpha0[static_cast<std::size_t>(j)] + 0.5);
  ex.sigma0 = Complex(0.0, -level);

  const std::size_t nd = static_cast<std::size_t>(K) + 1;  // delta-series length
  const DeltaSeries zero(nd, Complex{});
  ex.rows.resize(static_cast<std::size_t>(K));
  auto row = [&](int k, const MultiIndex& beta) -> const DeltaSeries& {
    if (k < 0) return zero;
    for (int b : beta)
      if (b < 0) return zero;
    const auto& m = ex.rows[static_cast<std::size_t>(k)];
    const auto it = m.find(beta);
    return it == m.end() ? zero : it->second;
  };

  for (int k = 0; k < K; ++k) {
    for_each_multi_index(n, bound(k), [&](const MultiIndex& beta) {
      DeltaSeries rhs(nd, Complex{});
      // Couplings through the degree >= 2 part of grad phi and degree >= 1 part of lap phi.
      for_each_multi_index(n, total_degree(beta), [&](const MultiIndex& gamma) {
        const int dg = total_degree(gamma);
        if (dg == 0) return;
        MultiIndex rest(beta);
        for (int j = 0; j < n; ++j) {
          rest[static_cast<std::size_t>(j)] -= gamma[static_cast<std::size_t>(j)];
          if (rest[static_cast<std::size_t>(j)] < 0) return;
        }
        const double lc = lap.coefficient(gamma);
        if (lc != 0.0) {
          const DeltaSeries& b = row(k, rest);
          for (std::size_t p = 0; p < nd; ++p) rhs[p] += lc * b[p];
        }
        if (dg < 2) return;
        for (int j = 0; j < n; ++j) {
          const double gc = grad[static_cast<std::size_t>(j)].coefficient(gamma);
          if (gc == 0.0) continue;
          MultiIndex up(rest);
          up[static_cast<std::size_t>(j)] += 1;
          const double w = 2.0 * gc * up[static_cast<std::size_t>(j)];
          const DeltaSeries& b = row(k, up);
          for (std::size_t p = 0; p < nd; ++p) rhs[p] += w * b[p];
        }
      });
      if (k >= 1) {
        for (int j = 0; j < n; ++j) {
          MultiIndex up(beta);
          up[static_cast<std::size_t>(j)] += 2;
          const double w = (beta[static_cast<std::size_t>(j)] + 2.0) * (beta[static_cast<std::size_t>(j)] + 1.0);
          const DeltaSeries& b = row(k - 1, up);
          for (std::size_t p = 0; p < nd; ++p) rhs[p] += -I * w * b[p];
        }
      }
      auto& rows = ex.rows[static_cast<std::size_t>(k)];
      if (beta == alpha0) {
        DeltaSeries gk = rhs;
        if (k == 0) gk[1] += -I;  // G_0 = i (sigma0 - sigma) = -i delta
        ex.G.push_back(gk);
        DeltaSeries one(nd, Complex{});
        if (k == 0) one[0] = 1.0;
        rows[beta] = one;
        return;
      }
      double c = 0.0;
      for (int j = 0; j < n; ++j)
        c += lambda[static_cast<std::size_t>(j)] * (beta[static_cast<std::size_t>(j)] - alpha0[static_cast<std::size_t>(j)]);
      DeltaSeries b = divide_linear(rhs, c);
      for (auto& v : b) v = -v;
      rows[beta] = std::move(b);
    });
  }

  // Solve sum_k h^k G_k(delta(h)) = 0 for delta(h) = sum_{m>=1} sigma_m h^m.
  ex.sigma.push_back(ex.sigma0);
  std::vector<Complex> delta(static_cast<std::size_t>(K), Complex{});  // h-series
  for (int m = 1; m < K; ++m) {
    Complex c{};
    // Powers of delta(h) truncated at h^m.
    std::vector<std::vector<Complex>> pw{std::vector<Complex>(static_cast<std::size_t>(m) + 1, Complex{})};
    pw[0][0] = 1.0;
    for (int p = 1; p <= m; ++p) {
      std::vector<Complex> next(static_cast<std::size_t>(m) + 1, Complex{});
      for (int a = 0; a <= m; ++a)
        for (int b = 1; a + b <= m; ++b)
          next[static_cast<std::size_t>(a + b)] += pw.back()[static_cast<std::size_t>(a)] * delta[static_cast<std::size_t>(b)];
      pw.push_back(std::move(next));
    }
    for (int k = 1; k <= m; ++k) {
      const DeltaSeries& gk = ex.G[static_cast<std::size_t>(k)];
      for (int p = 0; p <= m - k && p < static_cast<int>(nd); ++p)
        c += gk[static_cast<std::size_t>(p)] * pw[static_cast<std::size_t>(p)][static_cast<std::size_t>(m - k)];
    }
    const Complex sm = -I * c;
    delta[static_cast<std::size_t>(m)] = sm;
    ex.sigma.push_back(sm);
  }

  ex.E.push_back(bd.energy);
  for (const auto& s : ex.sigma) ex.E.push_back(s);
  return ex;
}

}  // namespace resolab
