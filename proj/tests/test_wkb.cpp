#include <doctest.h>

#include <cmath>
#include <numbers>

#include "resolab/wkb.hpp"
#include "support.hpp"

using namespace resolab;
using testing_support::barrier;

namespace {

const Complex I(0.0, 1.0);

struct Model {
  double h;
  std::vector<double> axis;
  TaylorPhase phase;
};

Model model(double h, int points = 801, double half_width = 2.0) {
  const Potential V = builtin("inverted_parabola");
  const Grid g{1, points, half_width};
  return {h, g.axis(), eikonal_taylor(V, barrier(V), 1, 4)};
}

Eigen::VectorXcd sample(const std::vector<double>& x, double h, int power) {
  Eigen::VectorXcd u(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    u(static_cast<Eigen::Index>(i)) = std::pow(x[i], power) * std::exp(I * x[i] * x[i] / (2 * h));
  return u;
}

}  // namespace

TEST_CASE("symbols of the model states") {
  const Model m = model(0.05);
  const DistortionSpec flat = DistortionSpec::rotation(0.0);
  SUBCASE("ground state: a is constant") {
    const WKBState s = extract_symbol(m.axis, sample(m.axis, m.h, 0), flat, m.phase, m.h, Complex(0.0, -m.h));
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s.a[i] - s.a[0]) < 1e-12);
    CHECK(transport_residual(s, Complex(0.0, -m.h), 0.0, m.h).residual < 1e-12);
  }
  SUBCASE("first excited state: a is proportional to x") {
    const WKBState s = extract_symbol(m.axis, sample(m.axis, m.h, 1), flat, m.phase, m.h, Complex(0.0, -3 * m.h));
    const Complex k = s.a.back() / s.x.back();
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s.a[i] - k * s.x[i]) < 1e-12);
    // Fourth-order differences are exact on the linear symbol.
    CHECK(transport_residual(s, Complex(0.0, -3 * m.h), 0.0, m.h).residual < 1e-10);
  }
  SUBCASE("reconstruction and invariance under u -> c u") {
    const Eigen::VectorXcd u = sample(m.axis, m.h, 1) + 0.3 * sample(m.axis, m.h, 0);
    const WKBState s = extract_symbol(m.axis, u, flat, m.phase, m.h, Complex(0.0, -m.h));
    const std::vector<Complex> back = s.reconstruct();
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(back[i] - s.u[i]) <= 1e-13 * std::abs(s.u[i]) + 1e-15);
    const WKBState t = extract_symbol(m.axis, Complex(-3.0, 7.5) * u, flat, m.phase, m.h, Complex(0.0, -m.h));
    const double r1 = transport_residual(s, Complex(0.0, -m.h), 0.0, m.h).residual;
    const double r2 = transport_residual(t, Complex(0.0, -m.h), 0.0, m.h).residual;
    CHECK(r2 == doctest::Approx(r1).epsilon(1e-12));
  }
  SUBCASE("a state that vanishes near the top is rejected") {
    Eigen::VectorXcd u = sample(m.axis, m.h, 0);
    for (std::size_t i = 0; i < m.axis.size(); ++i)
      if (std::abs(m.axis[i]) < 0.6) u(static_cast<Eigen::Index>(i)) = 0.0;
    CHECK_THROWS_AS(extract_symbol(m.axis, u, flat, m.phase, m.h, Complex(0.0, -m.h)), NumericalError);
  }
}

TEST_CASE("computed inverted parabola ground state has an almost constant symbol") {
  const double h = 0.02;
  const Potential V = builtin("inverted_parabola");
  const Grid g{1, 2400, 6.0};
  AssembleOptions o;
  o.fd_order = 4;
  const DistortedOperator op = assemble(V, h, DistortionSpec::rotation(std::numbers::pi / 6), g, o);
  const ResonantVector rv = resonant_vector(op, Complex(0.0, -h));
  SymbolOptions so;
  so.radius = 0.2;
  const WKBState s = extract_symbol(op, rv.u, eikonal_taylor(V, barrier(V), 1, 4), rv.eigenvalue, so);
  double var = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.inside(i)) var = std::max(var, std::abs(s.a[i] - s.a[s.size() / 2]));
  CHECK(var <= 0.01);
}

TEST_CASE("small-theta unrotation records its error and refuses large angles") {
  const double h = 0.05;
  const Potential V = builtin("gaussian_barrier");
  const BarrierData bd = barrier(V);
  const Grid g{1, 1000, 8.0};
  AssembleOptions o;
  o.fd_order = 4;
  const DistortedOperator op = assemble(V, h, DistortionSpec::rotation(0.05), g, o);
  const ResonantVector rv = resonant_vector(op, Complex(1.0, -h));
  SymbolOptions so;
  so.mode = Unrotation::SmallTheta;
  const TaylorPhase p = eikonal_taylor(V, bd, 1, 8);
  const WKBState s = extract_symbol(op, rv.u, p, rv.eigenvalue, so);
  CHECK(s.unrotation_error == doctest::Approx(0.05));
  const DistortedOperator wide = assemble(V, h, DistortionSpec::rotation(0.5), g, o);
  CHECK_THROWS_AS(extract_symbol(wide, resonant_vector(wide, Complex(1.0, -h)).u, p, Complex(1.0, -h), so),
                  ValidationError);
}

TEST_CASE("annihilation identity") {
  for (Complex z : {Complex(0.0, 0.0), Complex(1.0, -0.5), Complex(-3.0, 2.0)}) {
    const AnnihilationReport a = annihilation_check(0.1, z);
    const AnnihilationReport b = annihilation_check(0.1, 0.0);
    CHECK(std::abs(a.residual - b.residual) <= 1e-12 * b.residual);
    CHECK(std::abs(a.operator_residual - b.operator_residual) <= 1e-12 * b.operator_residual);
  }
  AnnihilationGrid coarse, fine;
  coarse.points = 399;
  fine.points = 799;
  CHECK(std::log2(annihilation_check(0.1, 0.0, coarse).residual / annihilation_check(0.1, 0.0, fine).residual) >=
        1.9);
}

TEST_CASE("annihilation decay on the model states") {
  const DistortionSpec flat = DistortionSpec::rotation(0.0);
  SUBCASE("A u0 vanishes up to differences") {
    const Model m = model(0.05, 4001);
    const DecayTable t = annihilation_decay(m.axis, sample(m.axis, m.h, 0), flat, m.phase, m.h, 1, 0.3);
    CHECK(t.norms[1] < 1e-6);
  }
  SUBCASE("A u1 = -ih u0 so the first norm scales like h") {
    std::vector<double> n;
    for (double h : {0.1, 0.05}) {
      const Model m = model(h, 4001);
      n.push_back(annihilation_decay(m.axis, sample(m.axis, h, 1), flat, m.phase, h, 1, 0.3).norms[1]);
    }
    CHECK(n[0] / n[1] == doctest::Approx(2.0).epsilon(1e-3));
  }
}

TEST_CASE("decay norms are insensitive to the phase truncation") {
  const Potential V = builtin("gaussian_barrier");
  const BarrierData bd = barrier(V);
  const double h = 0.05;
  const Grid g{1, 2000, 8.0};
  AssembleOptions o;
  o.fd_order = 4;
  const DistortedOperator op = assemble(V, h, DistortionSpec::rotation(0.5), g, o);
  const ResonantVector rv = resonant_vector(op, Complex(1.0, -h));
  const DecayTable k8 = annihilation_decay(op, rv.u, eikonal_taylor(V, bd, 1, 8), 3, 0.3);
  const DecayTable k6 = annihilation_decay(op, rv.u, eikonal_taylor(V, bd, 1, 6), 3, 0.3);
  for (int m = 1; m <= 3; ++m)
    CHECK(std::abs(k8.norms[static_cast<std::size_t>(m)] - k6.norms[static_cast<std::size_t>(m)]) <
          0.1 * k8.norms[static_cast<std::size_t>(m)]);
}

TEST_CASE("Taylor recurrence") {
  SUBCASE("inverted parabola collapses") {
    const Potential V = builtin("inverted_parabola");
    const ExpansionResult r = taylor_recurrence(V, barrier(V), {1}, 6);
    CHECK(r.E[1] == Complex(0.0, -3.0));
    for (int k = 2; k <= 6; ++k) CHECK(std::abs(r.E[static_cast<std::size_t>(k)]) <= 1e-12);
  }
  SUBCASE("eckart matches the exact resonance (sqrt(1 - h^2/4) - ih/2)^2") {
    const Potential V = builtin("eckart");
    const ExpansionResult r = taylor_recurrence(V, barrier(V), {0}, 6);
    const std::vector<Complex> exact{1.0, Complex(0, -1), -0.5, Complex(0, 0.125), 0.0, Complex(0, 1.0 / 128), 0.0};
    for (std::size_t k = 0; k < exact.size(); ++k) CHECK(std::abs(r.E[k] - exact[k]) < 1e-12);
    CHECK(r.G[0][0] == Complex(0.0, 0.0));
    CHECK(std::abs(r.G[0][1] - Complex(0.0, -1.0)) < 1e-15);
  }
  SUBCASE("gaussian series frozen from a symbolic solve") {
    const Potential V = builtin("gaussian_barrier");
    const ExpansionResult r = taylor_recurrence(V, barrier(V), {0}, 4);
    const std::vector<Complex> sym{1.0, Complex(0, -1), -3.0 / 8, Complex(0, -1.0 / 64), -7.0 / 512};
    for (std::size_t k = 0; k < sym.size(); ++k) CHECK(std::abs(r.E[k] - sym[k]) < 1e-12);
    const double h = 0.02;
    CHECK(std::abs(r.evaluate_G(r.sigma_at(h), h)) < 1e-8);
  }
  SUBCASE("two dimensions: E1 and simplicity") {
    const Potential V = builtin("gaussian_2d_anisotropic");
    const BarrierData bd = barrier(V);
    const ExpansionResult r = taylor_recurrence(V, bd, {1, 0}, 3);
    CHECK(std::abs(r.E[1] - Complex(0.0, -(1.5 * bd.lambda(0) + 0.5 * bd.lambda(1)))) < 1e-12);
    // lambda = (sqrt 2, 2 sqrt 2): alpha = (2, 0) ties with (0, 1).
    CHECK_THROWS_AS(taylor_recurrence(V, bd, {2, 0}, 3), ValidationError);
  }
}
