#include <doctest.h>

#include <cmath>
#include <random>

#include "resolab/verify.hpp"
#include "support.hpp"

using namespace resolab;
using testing_support::barrier;
using testing_support::fixed_config;

TEST_CASE("dist_in examples") {
  const std::vector<Complex> A{0.0, 2.0}, B{0.0, 2.0};
  const Distance same = dist_in(A, B, 0.0, 10.0);
  CHECK(same.d == 0.0);
  const std::vector<Complex> a{0.0}, b{1.0};
  const Distance d1 = dist_in(a, b, 0.0, 2.0);
  CHECK(d1.d_ab == 1.0);
  CHECK(d1.d_ba == 1.0);
  const std::vector<Complex> a2{0.0, 5.0}, b2{0.1};
  const Distance d2 = dist_in(a2, b2, 0.0, 1.0);
  CHECK(d2.d_ab == doctest::Approx(0.1));
  CHECK(d2.d_ba == doctest::Approx(0.1));
  const std::vector<Complex> none;
  CHECK(dist_in(none, b2, 0.0, 1.0).d_ab == 0.0);
}

TEST_CASE("dist_in symmetry and bounds on random sets") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Complex> A(7), B(4);
    for (auto& a : A) a = {u(rng), u(rng)};
    for (auto& b : B) b = {u(rng), u(rng)};
    const Distance ab = dist_in(A, B, 0.0, 0.8);
    const Distance ba = dist_in(B, A, 0.0, 0.8);
    CHECK(ab.d_ab == ba.d_ba);
    CHECK(ab.d_ba == ba.d_ab);
    CHECK(ab.d == ba.d);
    CHECK(ab.d <= 2.0 * std::sqrt(8.0));
  }
}

TEST_CASE("match treats a multiple lattice point as matched by any resonance") {
  const std::vector<double> lambda{1.0, 1.0};
  const PseudoResonanceLattice lat = pseudo_resonances(0.0, lambda, 0.1, 2.5);
  REQUIRE(lat.points.size() == 2);
  const std::vector<Complex> res{Complex(0.001, -0.1), Complex(-0.002, -0.2)};
  const MatchReport m = match(res, lat);
  CHECK(m.unmatched_lattice.empty());
  CHECK(m.unmatched_resonances.empty());
  CHECK(m.d == doctest::Approx(0.002));
  const std::vector<Complex> one{Complex(0.0, -0.1)};
  CHECK(match(one, lat).unmatched_lattice.size() == 1);
}

TEST_CASE("log-log fit recovers a power law") {
  const std::vector<double> x{0.2, 0.1, 0.05, 0.025};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.7));
  const LineFit f = fit_loglog(x, y);
  CHECK(f.slope == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.residual < 1e-12);
}

TEST_CASE("sweep of the exact family and determinism") {
  const Potential V = builtin("inverted_parabola");
  const BarrierData bd = barrier(V);
  const std::vector<double> hs{0.2, 0.1, 0.05};
  const SpectralConfig cfg = fixed_config(800, 10.0, 0.5);
  const SweepResult a = h_sweep(V, bd, 4.0, hs, cfg, 2);
  const SweepResult b = h_sweep(V, bd, 4.0, hs, cfg, 1);
  CHECK(a.exact_family);
  REQUIRE(a.entries.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.entries[k].d == b.entries[k].d);
    CHECK(a.entries[k].d <= 1e-3 * hs[k]);
    CHECK_FALSE(a.entries[k].flagged);
  }
}

TEST_CASE("sweep validation") {
  const Potential V = builtin("gaussian_barrier");
  const BarrierData bd = barrier(V);
  const SpectralConfig cfg = fixed_config(400, 8.0, 0.5);
  const std::vector<double> two{0.2, 0.1};
  const std::vector<double> rising{0.1, 0.2, 0.05};
  CHECK_THROWS_AS(h_sweep(V, bd, 4.0, two, cfg), ValidationError);
  CHECK_THROWS_AS(h_sweep(V, bd, 4.0, rising, cfg), ValidationError);
}

TEST_CASE("resolvent scan in the upper half plane is flat") {
  const Potential V = builtin("gaussian_barrier");
  const BarrierData bd = barrier(V);
  const double h = 0.05;
  SpectralConfig cfg = fixed_config(600, 8.0, 0.5);
  cfg.theta.value = 0.0;
  LineSpec line;
  line.start = Complex(1.0, 0.5 * 4.0 * h);
  line.end = Complex(1.0, 0.25 * 4.0 * h);
  line.samples = 40;
  const ResolventProfile p = resolvent_scan(V, bd, h, 4.0, line, cfg);
  CHECK(p.peaks.empty());
  for (const auto& q : p.points) CHECK(q.norm <= 1.0 / q.z.imag() * (1 + 1e-9));
}

TEST_CASE("resolvent scan below the gaussian barrier finds the two lattice ordinates") {
  const Potential V = builtin("gaussian_barrier");
  const BarrierData bd = barrier(V);
  const double h = 0.05;
  const ResolventProfile p = resolvent_scan(V, bd, h, 4.0, {}, fixed_config(2000, 8.0, 0.5));
  REQUIRE(p.peaks.size() == 2);
  CHECK(p.ordinate_distance.d <= 0.1 * h);
  REQUIRE(p.midpoints.size() == 1);
  for (const auto& k : p.peaks) CHECK(k.midpoint_ratio > 10.0);
}
