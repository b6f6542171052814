#include <doctest.h>

#include <set>

#include "resolab/lattice.hpp"

using namespace resolab;

namespace {

std::vector<double> levels(const PseudoResonanceLattice& lat) {
  std::vector<double> out;
  for (const auto& p : lat.points) out.push_back(p.level);
  return out;
}

}  // namespace

TEST_CASE("lambda = 2 at E0 = 0 gives the odd multiples of -ih") {
  const std::vector<double> lambda{2.0};
  const double h = 0.037;
  const PseudoResonanceLattice lat = pseudo_resonances(0.0, lambda, h, 10.0);
  REQUIRE(lat.points.size() == 5);
  for (int m = 0; m < 5; ++m) {
    const auto& p = lat.points[static_cast<std::size_t>(m)];
    CHECK(p.z == Complex(0.0, -h * (2 * m + 1)));
    CHECK(p.multiplicity == 1);
    CHECK(p.witnesses == std::vector<MultiIndex>{{m}});
  }
}

TEST_CASE("lambda = (1, 2): 7/2 is a double point") {
  const std::vector<double> lambda{1.0, 2.0};
  const PseudoResonanceLattice lat = pseudo_resonances(0.0, lambda, 0.1, 4.0);
  CHECK(levels(lat) == std::vector<double>{1.5, 2.5, 3.5});
  const auto& p = lat.points[2];
  CHECK(p.multiplicity == 2);
  const std::set<MultiIndex> w(p.witnesses.begin(), p.witnesses.end());
  CHECK(w == std::set<MultiIndex>{{2, 0}, {0, 1}});
}

TEST_CASE("subprincipal shift moves every point by h s") {
  const std::vector<double> lambda{2.0};
  const Complex s(0.3, -0.1);
  const double h = 0.05;
  const PseudoResonanceLattice lat = pseudo_resonances(1.0, lambda, h, 3.0, s);
  REQUIRE_FALSE(lat.points.empty());
  CHECK(std::abs(lat.points[0].z - (1.0 + h * s - Complex(0.0, h))) < 1e-15);
  for (const auto& p : lat.points)
    for (const auto& a : p.witnesses) CHECK(std::abs(lat.value(a) - p.z) < 1e-15);
}

TEST_CASE("gamma0 examples") {
  const std::vector<double> l2{2.0};
  const PseudoResonanceLattice g = gamma0(l2, 0.0, 0.1, 4.0);
  CHECK(levels(g) == std::vector<double>{1.0, 3.0});
  const std::vector<double> l11{1.0, 1.0};
  const PseudoResonanceLattice g2 = gamma0(l11, 0.0, 0.1, 4.0);
  REQUIRE(g2.points.size() == 3);
  CHECK(g2.points[0].multiplicity == 1);
  CHECK(g2.points[1].multiplicity == 2);
  CHECK(g2.points[2].multiplicity == 3);
  CHECK(g2.points[2].z == Complex(0.0, -0.1 * 3.0));
}

TEST_CASE("lattice invariants") {
  for (const auto& lambda : std::vector<std::vector<double>>{{2.0}, {1.0, 2.0}, {2.0, 3.0}, {1.0, std::sqrt(2.0)}}) {
    const double h = 0.05, E0 = 0.4, C = 12.0;
    const PseudoResonanceLattice a = pseudo_resonances(E0, lambda, h, C);
    const PseudoResonanceLattice b = pseudo_resonances(E0, lambda, 2 * h, C);
    REQUIRE(a.points.size() == b.points.size());
    double half = 0.0;
    for (double l : lambda) half += 0.5 * l;
    for (std::size_t k = 0; k < a.points.size(); ++k) {
      // Scaling h -> 2h doubles z - E0 exactly.
      CHECK(b.points[k].z - E0 == 2.0 * (a.points[k].z - E0));
      CHECK(a.points[k].z.imag() <= -h * half + 1e-15);
      CHECK(a.points[k].multiplicity == static_cast<int>(a.points[k].witnesses.size()));
      const std::set<MultiIndex> w(a.points[k].witnesses.begin(), a.points[k].witnesses.end());
      CHECK(w.size() == a.points[k].witnesses.size());
    }
  }
}

TEST_CASE("mu sequences") {
  const std::vector<double> l12{1.0, 2.0};
  const MuSequence a = mu_sequence(l12, 5);
  CHECK(a.values == std::vector<double>{0, 1, 2, 3, 4});
  CHECK(a.counts == std::vector<int>{1, 1, 2, 2, 3});
  const std::vector<double> l2{2.0};
  CHECK(mu_sequence(l2, 3).values == std::vector<double>{0, 2, 4});
  const std::vector<double> l23{2.0, 3.0};
  const MuSequence c = mu_sequence(l23, 6);
  CHECK(c.values == std::vector<double>{0, 2, 3, 4, 5, 6});
  CHECK(c.counts.back() == 2);
  CHECK(a.values[1] == l12[0]);
  CHECK_THROWS_AS(mu_sequence(l2, 0), ValidationError);
}

TEST_CASE("simplicity") {
  const std::vector<double> l12{1.0, 2.0};
  CHECK(is_simple({0, 0}, l12));
  CHECK_FALSE(is_simple({2, 0}, l12));
  const std::vector<double> l1{1.0};
  for (int a = 0; a < 10; ++a) CHECK(is_simple({a}, l1));
}

TEST_CASE("input validation") {
  const std::vector<double> bad{-1.0};
  CHECK_THROWS_AS(pseudo_resonances(0.0, bad, 0.1, 1.0), ValidationError);
  const std::vector<double> l{2.0};
  CHECK_THROWS_AS(pseudo_resonances(0.0, l, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(pseudo_resonances(0.0, l, 0.1, -1.0), ValidationError);
}
