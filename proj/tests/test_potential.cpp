#include <doctest.h>

#include <cmath>
#include <numbers>

#include "resolab/potential.hpp"
#include "support.hpp"

using namespace resolab;
using testing_support::barrier;

TEST_CASE("barrier data of the builtin families") {
  SUBCASE("inverted parabola") {
    const BarrierData bd = barrier(builtin("inverted_parabola"));
    CHECK(bd.energy == doctest::Approx(0.0));
    CHECK(bd.lambda(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(bd.hessian(0, 0) == doctest::Approx(-2.0).epsilon(1e-14));
  }
  SUBCASE("gaussian from an offset guess") {
    const Potential V = builtin("gaussian_barrier", {{"E0", 1.0}, {"c", 1.0}});
    const std::vector<double> guess{0.3};
    const BarrierData bd = find_barrier(V, guess);
    CHECK(std::abs(bd.critical_point(0)) < 1e-12);
    CHECK(bd.energy == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(bd.lambda(0) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("eckart: lambda = 2 alpha sqrt(V0)") {
    const BarrierData bd = barrier(builtin("eckart", {{"V0", 2.0}, {"alpha", 0.5}}));
    CHECK(bd.lambda(0) == doctest::Approx(2.0 * 0.5 * std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("anisotropic gaussian: lambda_j = 2 sqrt(c_j E0)") {
    const BarrierData bd = barrier(builtin("gaussian_2d_anisotropic", {{"E0", 1.0}, {"c1", 0.5}, {"c2", 2.0}}));
    REQUIRE(bd.dimension() == 2);
    CHECK(bd.lambda(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(bd.lambda(1) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("find_barrier rejects a minimum and is idempotent") {
  CHECK_THROWS_AS(barrier(testing_support::harmonic()), ValidationError);
  const Potential V = builtin("gaussian_barrier");
  const std::vector<double> guess{0.4};
  const BarrierData bd = find_barrier(V, guess);
  const std::vector<double> again(bd.critical_point.data(), bd.critical_point.data() + 1);
  const BarrierData bd2 = find_barrier(V, again);
  CHECK(std::abs(bd2.critical_point(0) - bd.critical_point(0)) < 1e-14);
}

TEST_CASE("builtin validation") {
  CHECK_THROWS_AS(builtin("no_such_family"), ValidationError);
  CHECK_THROWS_AS(builtin("gaussian_barrier", {{"c", -1.0}}), ValidationError);
  CHECK_THROWS_AS(builtin("gaussian_barrier", {{"width", 1.0}}), ValidationError);
  CHECK_THROWS_AS(builtin("trapping_counterexample", {{"wall_height", 0.5}}), ValidationError);
  CHECK(builtin("compact_bump_plus_gaussian").analyticity() == Analyticity::SectorOnly);
  CHECK_FALSE(builtin("inverted_parabola").caveat().empty());
}

TEST_CASE("rotated evaluation") {
  const Potential G = builtin("gaussian_barrier");
  CHECK(rotate_eval(G, 1.0, 0.0).real() == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(rotate_eval(G, 1.0, 0.0).imag() == 0.0);
  // mpmath: exp(-(2 e^{0.1 i})^2)
  const Complex v = rotate_eval(G, 2.0, 0.1);
  CHECK(v.real() == doctest::Approx(0.013895285043894111).epsilon(1e-13));
  CHECK(v.imag() == doctest::Approx(-0.014155580982579392).epsilon(1e-13));
  const Complex p = rotate_eval(builtin("inverted_parabola"), 1.0, std::numbers::pi / 4);
  CHECK(std::abs(p - Complex(0.0, -1.0)) < 1e-15);
  CHECK_THROWS_AS(rotate_eval(builtin("compact_bump_plus_gaussian"), 1.0, 0.1), ValidationError);
}

TEST_CASE("rotated potentials decay at the box edge") {
  for (const char* name : {"gaussian_barrier", "eckart"}) {
    const Potential V = builtin(name);
    CHECK(std::abs(rotate_eval(V, 12.0, 0.5)) < 1e-6);
  }
}

TEST_CASE("analytic derivatives agree with central differences at second order") {
  const std::vector<std::pair<const char*, std::vector<double>>> cases = {
      {"gaussian_barrier", {0.37}},
      {"eckart", {-0.61}},
      {"inverted_parabola", {0.8}},
      {"compact_bump_plus_gaussian", {2.3}},
      {"trapping_counterexample", {4.1}},
      {"gaussian_2d_anisotropic", {0.3, -0.45}},
  };
  for (const auto& [name, x] : cases) {
    CAPTURE(name);
    const Potential V = builtin(name);
    const Eigen::VectorXd g = V.gradient(x);
    const Eigen::MatrixXd H = V.hessian(x);
    std::vector<double> err;
    for (double d : {1e-2, 5e-3}) {
      double e = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        std::vector<double> xp = x, xm = x;
        xp[j] += d;
        xm[j] -= d;
        e = std::max(e, std::abs((V.value(std::span<const double>(xp)) - V.value(std::span<const double>(xm))) /
                                     (2 * d) -
                                 g(static_cast<Eigen::Index>(j))));
        const Eigen::VectorXd gp = V.gradient(xp), gm = V.gradient(xm);
        e = std::max(e, ((gp - gm) / (2 * d) - H.col(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff());
      }
      err.push_back(e);
    }
    if (err[0] > 1e-11) CHECK(std::log2(err[0] / err[1]) >= 1.9);
  }
}

TEST_CASE("Taylor coefficients of the gaussian at the top") {
  const Potential V = builtin("gaussian_barrier");
  const std::vector<double> c{0.0};
  const Series s = V.taylor(c, 6);
  // e^{-x^2} = 1 - x^2 + x^4/2 - x^6/6
  CHECK(s.coefficient({0}) == doctest::Approx(1.0));
  CHECK(s.coefficient({1}) == doctest::Approx(0.0));
  CHECK(s.coefficient({2}) == doctest::Approx(-1.0));
  CHECK(s.coefficient({4}) == doctest::Approx(0.5));
  CHECK(s.coefficient({6}) == doctest::Approx(-1.0 / 6.0));
}
