#include "resolab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace resolab {

namespace {

void check_lambda(std::span<const double> lambda) {
  if (lambda.empty() || lambda.size() > 2) throw ValidationError("lambda must have 1 or 2 entries");
  for (double l : lambda)
    if (!(l > 0.0) || !std::isfinite(l)) throw ValidationError("lambda entries must be positive");
}

double dot(const MultiIndex& alpha, std::span<const double> lambda) {
  double s = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) s += lambda[j] * alpha[j];
  return s;
}

/// Visits every alpha with alpha . lambda <= bound.
void enumerate_below(std::span<const double> lambda, double bound,
                     const std::function<void(const MultiIndex&, double)>& fn) {
  MultiIndex alpha(lambda.size(), 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t j, double used) {
    if (j == lambda.size()) {
      fn(alpha, used);
      return;
    }
    for (int a = 0; used + lambda[j] * a <= bound; ++a) {
      alpha[j] = a;
      rec(j + 1, used + lambda[j] * a);
    }
    alpha[j] = 0;
  };
  if (bound >= 0.0) rec(0, 0.0);
}

struct Entry {
  double value;
  MultiIndex alpha;
};

/// Sorts by value and groups values equal within a relative tolerance.
std::vector<std::vector<Entry>> group(std::vector<Entry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.value < b.value; });
  std::vector<std::vector<Entry>> groups;
  for (auto& e : entries) {
    if (!groups.empty()) {
      const double ref = groups.back().front().value;
      if (std::abs(e.value - ref) <= kLatticeTolerance * std::max(1.0, std::abs(ref))) {
        groups.back().push_back(std::move(e));
        continue;
      }
    }
    groups.push_back({std::move(e)});
  }
  return groups;
}

}  // namespace

Complex PseudoResonanceLattice::value(const MultiIndex& alpha) const {
  double level = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) level += lambda[j] * (0.5 + alpha[j]);
  return E0 + h * (Complex(0.0, -level) + shift);
}

std::vector<Complex> PseudoResonanceLattice::values() const {
  std::vector<Complex> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.z);
  return out;
}

PseudoResonanceLattice pseudo_resonances(double E0, std::span<const double> lambda, double h, double C,
                                         Complex shift) {
  check_lambda(lambda);
  if (!(h > 0.0)) throw ValidationError("pseudo_resonances: h must be positive");
  if (!(C > 0.0)) throw ValidationError("pseudo_resonances: C must be positive");

  PseudoResonanceLattice lat;
  lat.E0 = E0;
  lat.lambda.assign(lambda.begin(), lambda.end());
  lat.h = h;
  lat.C = C;
  lat.shift = shift;

  double half = 0.0;
  for (double l : lambda) half += 0.5 * l;
  // Every level with a point in the window satisfies level <= C + |s|.
  const double bound = C + std::abs(shift) - half;
  std::vector<Entry> entries;
  enumerate_below(lambda, bound * (1.0 + kLatticeTolerance) + kLatticeTolerance,
                  [&](const MultiIndex& alpha, double used) { entries.push_back({half + used, alpha}); });

  for (auto& g : group(std::move(entries))) {
    const double level = g.front().value;
    // z - E0 = h (-i level + s); the window test is done in units of h.
    if (!(std::abs(Complex(0.0, -level) + shift) < C)) continue;
    LatticePoint p;
    p.level = level;
    p.z = E0 + h * (Complex(0.0, -level) + shift);
    p.multiplicity = static_cast<int>(g.size());
    for (auto& e : g) p.witnesses.push_back(std::move(e.alpha));
    lat.points.push_back(std::move(p));
  }
  return lat;
}

PseudoResonanceLattice pseudo_resonances(const BarrierData& bd, double h, double C, Complex shift) {
  std::vector<double> lambda(bd.lambda.data(), bd.lambda.data() + bd.lambda.size());
  return pseudo_resonances(bd.energy, lambda, h, C, shift);
}

PseudoResonanceLattice gamma0(std::span<const double> lambda, Complex p1_at_origin, double h, double C) {
  return pseudo_resonances(0.0, lambda, h, C, p1_at_origin);
}

MuSequence mu_sequence(std::span<const double> lambda, int count) {
  check_lambda(lambda);
  if (count < 1) throw ValidationError("mu_sequence: count must be >= 1");
  MuSequence mu;
  mu.lambda.assign(lambda.begin(), lambda.end());
  // alpha = (k, 0, ...) for k < count already gives `count` distinct values.
  const double lambda_min = *std::min_element(lambda.begin(), lambda.end());
  const double bound = (count - 1) * lambda_min;
  std::vector<Entry> entries;
  enumerate_below(lambda, bound * (1.0 + 1e-9) + 1e-12,
                  [&](const MultiIndex& alpha, double used) { entries.push_back({used, alpha}); });
  for (auto& g : group(std::move(entries))) {
    if (static_cast<int>(mu.values.size()) == count) break;
    mu.values.push_back(g.front().value);
    mu.counts.push_back(static_cast<int>(g.size()));
  }
  return mu;
}

bool is_simple(const MultiIndex& alpha0, std::span<const double> lambda) {
  check_lambda(lambda);
  if (alpha0.size() != lambda.size()) throw ValidationError("is_simple: alpha and lambda differ in length");
  for (int a : alpha0)
    if (a < 0) throw ValidationError("is_simple: alpha entries must be non-negative");
  const double target = dot(alpha0, lambda);
  const double tol = kLatticeTolerance * std::max(1.0, target);
  int ties = 0;
  enumerate_below(lambda, target + tol, [&](const MultiIndex&, double used) {
    if (std::abs(used - target) <= tol) ++ties;
  });
  return ties == 1;
}

}  // namespace resolab
