// Acceptance suite: one line per criterion, exit status 1 when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "resolab/classical.hpp"
#include "resolab/lattice.hpp"
#include "resolab/potential.hpp"
#include "resolab/spectral.hpp"
#include "resolab/verify.hpp"
#include "resolab/wkb.hpp"

using namespace resolab;

namespace {

int failures = 0;

void report(int id, const char* title, bool pass, const std::string& detail) {
  std::printf("criterion %d [%s]: %s  %s\n", id, title, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SpectralConfig desk_config(int points, double half_width, double theta) {
  SpectralConfig c;
  c.grid.points = points;
  c.grid.half_width = half_width;
  c.assemble.fd_order = 4;
  c.theta.kind = ThetaPolicy::Kind::Fixed;
  c.theta.value = theta;
  return c;
}

const std::vector<double> kSweep = {0.2, 0.1, 0.05, 0.025};

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const Potential V = builtin("inverted_parabola");
  const double h = 0.05;
  const double theta = std::numbers::pi / 6;
  const SpectralConfig cfg = desk_config(1200, 12.0, theta);
  const ResonanceSet rs = resonances(V, 0.0, h, 10.0, cfg);
  double worst = 0.0;
  for (int m = 0; m <= 3; ++m) {
    const Complex exact(0.0, -h * (2 * m + 1));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : rs.resonances) best = std::min(best, std::abs(r.z - exact));
    worst = std::max(worst, best);
  }

  // Exact state e^{i x^2 / 2h} at the rotated coordinates.
  const DistortedOperator op = assemble(V, h, cfg.distortion_for(h), cfg.grid, cfg.assemble);
  Eigen::VectorXcd u(static_cast<Eigen::Index>(op.size()));
  for (std::size_t i = 0; i < op.size(); ++i) {
    const Complex y = op.mapped_axis[i];
    u(static_cast<Eigen::Index>(i)) = std::exp(Complex(0.0, 1.0) * y * y / (2.0 * h));
  }
  const double state_residual = (op.matrix * u - Complex(0.0, -h) * u).norm() / u.norm();

  // Box doubling at fixed spacing.
  const SpectralConfig big = desk_config(2 * 1200 + 1, 24.0, theta);
  const ResonanceSet rb = resonances(V, 0.0, h, 10.0, big);
  double box_shift = 0.0;
  for (const auto& r : rs.resonances) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : rb.resonances) best = std::min(best, std::abs(q.z - r.z));
    box_shift = std::max(box_shift, best / std::abs(r.z));
  }
  const double elapsed = seconds_since(t0);
  const bool pass = rs.resonances.size() >= 4 && worst <= 1e-3 * h && box_shift <= 1e-6 && elapsed <= 60.0;
  report(1, "exact-model resonances", pass,
         fmt("found %zu in B(0,10h); max |z - (-ih(2m+1))|, m=0..3 = %.2e h (tol 1e-3 h); "
             "exact-state residual %.1e; box-doubling relative shift %.1e (tol 1e-6); %.1f s",
             rs.resonances.size(), worst / h, state_residual, box_shift, elapsed));
}

SweepResult run_sweep(const std::string& family) {
  const Potential V = builtin(family);
  const std::vector<double> guess{0.0};
  const BarrierData bd = find_barrier(V, guess);
  return h_sweep(V, bd, 4.0, kSweep, desk_config(2000, 8.0, 0.5), 0);
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepResult sr = run_sweep("gaussian_barrier");
  std::string table;
  for (const auto& e : sr.entries) table += fmt(" %.3g:%.4f", e.h, e.d_over_h);
  const double elapsed = seconds_since(t0);
  const bool pass = sr.ratio_strictly_decreasing() && sr.max_successive_ratio() <= 0.75 && sr.q() >= 1.5 &&
                    elapsed <= 600.0;
  report(2, "lattice law, gaussian_barrier", pass,
         fmt("d/h by h:%s; max successive ratio %.3f (tol 0.75); q = %.3f (tol 1.5); theta = 0.5; %.1f s",
             table.c_str(), sr.max_successive_ratio(), sr.q(), elapsed));
}

void criterion3() {
  const Potential V = builtin("eckart");
  const std::vector<double> guess{0.0};
  const BarrierData bd = find_barrier(V, guess);
  const ExpansionResult ex = taylor_recurrence(V, bd, {0}, 4);
  const double lambda = 2.0 * std::sqrt(1.0);
  const double e1_error = std::abs(ex.E[1] - Complex(0.0, -0.5 * lambda));

  const SweepResult sr = run_sweep("eckart");
  // (z - E0 - E1 h) / h^2 = E2 + E3 h + ...: least squares line in h, intercept -> E2.
  std::vector<double> hs;
  std::vector<Complex> ys;
  for (const auto& e : sr.entries) {
    const Complex target = bd.energy + ex.E[1] * e.h;
    const Complex* best = nullptr;
    for (const auto& r : e.resonances.resonances)
      if (!best || std::abs(r.z - target) < std::abs(*best - target)) best = &r.z;
    if (!best) continue;
    hs.push_back(e.h);
    ys.push_back((*best - bd.energy - ex.E[1] * e.h) / (e.h * e.h));
  }
  Complex c0 = std::numeric_limits<double>::quiet_NaN();
  if (hs.size() >= 2) {
    const double n = static_cast<double>(hs.size());
    double sx = 0, sxx = 0;
    Complex sy = 0, sxy = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      sx += hs[i];
      sxx += hs[i] * hs[i];
      sy += ys[i];
      sxy += hs[i] * ys[i];
    }
    const Complex slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    c0 = (sy - slope * sx) / n;
  }
  const double rel = std::abs(c0 - ex.E[2]) / std::abs(ex.E[2]);
  const bool pass = e1_error <= 1e-14 && rel <= 0.05 && hs.size() == kSweep.size();
  report(3, "expansion cross-check, eckart", pass,
         fmt("|E1 + i| = %.1e; recurrence E2 = %.6f%+.6fi; fitted E2 = %.6f%+.6fi; relative gap %.2e (tol 0.05); "
             "eckart d/h max successive ratio %.3f, q = %.3f",
             e1_error, ex.E[2].real(), ex.E[2].imag(), c0.real(), c0.imag(), rel, sr.max_successive_ratio(),
             sr.q()));
}

void criterion4() {
  const Potential V = builtin("inverted_parabola");
  const std::vector<double> guess{0.0};
  const BarrierData bd = find_barrier(V, guess);
  const ExpansionResult ex = taylor_recurrence(V, bd, {0}, 6);
  double worst = 0.0;
  for (int k = 2; k <= 6; ++k) worst = std::max(worst, std::abs(ex.E[static_cast<std::size_t>(k)]));
  report(4, "exactly-quadratic collapse", worst <= 1e-12, fmt("max |E_k|, k=2..6 = %.1e (tol 1e-12)", worst));
}

void criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const Potential V = builtin("gaussian_barrier");
  const std::vector<double> guess{0.0};
  const BarrierData bd = find_barrier(V, guess);
  const double h = 0.05;
  std::string detail;
  bool pass_any = false;
  for (bool paper : {true, false}) {
    SpectralConfig cfg = desk_config(2000, 8.0, 0.5);
    if (paper) cfg.theta.kind = ThetaPolicy::Kind::Paper;
    ScanOptions so;
    so.jobs = 0;
    const ResolventProfile p = resolvent_scan(V, bd, h, 4.0, {}, cfg, so);
    bool found1 = false, found3 = false;
    double min_ratio = std::numeric_limits<double>::infinity();
    std::string peaks;
    for (const auto& k : p.peaks) {
      const double y = (k.z.imag()) / h;
      if (std::abs(y + 1.0) <= 0.1) found1 = true;
      if (std::abs(y + 3.0) <= 0.1) found3 = true;
      min_ratio = std::min(min_ratio, std::isnan(k.midpoint_ratio) ? 0.0 : k.midpoint_ratio);
      peaks += fmt(" %.3fh(ratio %.1f)", y, k.midpoint_ratio);
    }
    const bool pass = found1 && found3 && p.peaks.size() == 2 && min_ratio >= 100.0;
    pass_any = pass_any || pass;
    detail += fmt("theta = %.4f: peaks at%s; ", p.theta, peaks.c_str());
  }
  detail += fmt("ratio tol 100; %.1f s", seconds_since(t0));
  report(5, "resolvent structure", pass_any && seconds_since(t0) <= 300.0, detail);
}

void criterion6() {
  const Potential V = builtin("gaussian_barrier");
  const std::vector<double> guess{0.0};
  const BarrierData bd = find_barrier(V, guess);
  const SpectralConfig cfg = desk_config(2000, 8.0, 0.5);
  const TaylorPhase phase = eikonal_taylor(V, bd, 1, 8);
  const std::vector<double> hs = {0.1, 0.05, 0.025};
  std::vector<double> r_lattice, r_computed, decay;
  for (double h : hs) {
    const DistortedOperator op = assemble(V, h, cfg.distortion_for(h), cfg.grid, cfg.assemble);
    const Complex z0 = pseudo_resonances(bd, h, 1.0).value({0});
    const ResonantVector rv = resonant_vector(op, z0);
    const WKBState st = extract_symbol(op, rv.u, phase, rv.eigenvalue);
    r_lattice.push_back(transport_residual(st, z0, bd.energy, h).residual);
    TransportOptions loose;
    loose.check_coarse = false;
    r_computed.push_back(transport_residual(st, rv.eigenvalue, bd.energy, h, loose).residual);
    decay.push_back(annihilation_decay(op, rv.u, phase, 1, 0.3).norms[1]);
  }
  double worst = 0.0;
  for (std::size_t i = 1; i < hs.size(); ++i) worst = std::max(worst, r_lattice[i] / r_lattice[i - 1]);
  const LineFit fit = fit_loglog(hs, decay);
  const bool pass = worst <= 0.75 && fit.slope >= 0.9;
  report(6, "WKB structure", pass,
         fmt("transport residual at the lattice z: %.2e %.2e %.2e, max ratio %.3f (tol 0.75); "
             "at the computed z: %.1e %.1e %.1e (discretization floor); decay slope %.3f (tol 0.9)",
             r_lattice[0], r_lattice[1], r_lattice[2], worst, r_computed[0], r_computed[1], r_computed[2],
             fit.slope));
}

void criterion7() {
  const double h = 0.1;
  std::vector<double> res;
  double zdiff = 0.0;
  for (int n : {399, 799, 1599}) {
    AnnihilationGrid g;
    g.points = n;
    const AnnihilationReport a = annihilation_check(h, 0.0, g);
    const AnnihilationReport b = annihilation_check(h, Complex(1.0, -0.5), g);
    zdiff = std::max(zdiff, std::abs(a.residual - b.residual) / a.residual);
    zdiff = std::max(zdiff, std::abs(a.operator_residual - b.operator_residual) / a.operator_residual);
    res.push_back(a.residual);
  }
  const double order = std::min(std::log2(res[0] / res[1]), std::log2(res[1] / res[2]));
  report(7, "algebraic identity", order >= 1.9 && zdiff <= 1e-12,
         fmt("residual %.2e %.2e %.2e under dx halving, order %.3f (tol 1.9); z-dependence %.1e (tol 1e-12)", res[0],
             res[1], res[2], order, zdiff));
}

// Independent enumerator: integer arithmetic on 2 lambda (all test lambdas are integers).
struct BrutePoint {
  long twice_level;
  std::set<MultiIndex> witnesses;
};

std::map<long, BrutePoint> brute_lattice(const std::vector<int>& lambda, double C) {
  std::map<long, BrutePoint> out;
  const int n = static_cast<int>(lambda.size());
  const int a_max = static_cast<int>(std::ceil(C / *std::min_element(lambda.begin(), lambda.end()))) + 1;
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  for (int a0 = 0; a0 <= a_max; ++a0) {
    for (int a1 = 0; a1 <= (n == 2 ? a_max : 0); ++a1) {
      long twice = lambda[0] * (2L * a0 + 1);
      MultiIndex alpha{a0};
      if (n == 2) {
        twice += lambda[1] * (2L * a1 + 1);
        alpha.push_back(a1);
      }
      if (!(static_cast<double>(twice) < 2.0 * C)) continue;
      auto& p = out[twice];
      p.twice_level = twice;
      p.witnesses.insert(alpha);
    }
  }
  return out;
}

std::map<long, int> brute_mu(const std::vector<int>& lambda, int count) {
  std::map<long, int> all;
  const int bound = count * *std::max_element(lambda.begin(), lambda.end());
  for (int a0 = 0; a0 <= bound; ++a0)
    for (int a1 = 0; a1 <= (lambda.size() == 2 ? bound : 0); ++a1) {
      const long v = lambda[0] * a0 + (lambda.size() == 2 ? lambda[1] * a1 : 0);
      if (v <= bound) ++all[v];
    }
  std::map<long, int> first;
  for (const auto& [v, c] : all) {
    if (static_cast<int>(first.size()) == count) break;
    first[v] = c;
  }
  return first;
}

void criterion8() {
  int mismatches = 0, compared = 0;
  const std::vector<std::vector<int>> lambdas = {{2}, {1, 2}, {2, 3}, {1, 1}};
  const double E0 = 0.7, h = 0.03;
  for (const auto& li : lambdas) {
    std::vector<double> ld(li.begin(), li.end());
    for (double C : {1.0, 2.5, 4.0, 7.5, 10.0, 20.0}) {
      const PseudoResonanceLattice lat = pseudo_resonances(E0, ld, h, C);
      const auto brute = brute_lattice(li, C);
      ++compared;
      if (lat.points.size() != brute.size()) {
        ++mismatches;
        continue;
      }
      auto it = brute.begin();
      for (const auto& p : lat.points) {
        const double level = 0.5 * static_cast<double>(it->first);
        const Complex z = E0 + h * Complex(0.0, -level);
        const std::set<MultiIndex> w(p.witnesses.begin(), p.witnesses.end());
        if (p.level != level || p.z != z || p.multiplicity != static_cast<int>(it->second.witnesses.size()) ||
            w != it->second.witnesses || w.size() != p.witnesses.size())
          ++mismatches;
        ++it;
      }
    }
    for (int count : {1, 5, 12, 30}) {
      const MuSequence mu = mu_sequence(ld, count);
      const auto brute = brute_mu(li, count);
      ++compared;
      if (mu.values.size() != brute.size()) {
        ++mismatches;
        continue;
      }
      auto it = brute.begin();
      for (std::size_t k = 0; k < mu.values.size(); ++k, ++it)
        if (mu.values[k] != static_cast<double>(it->first) || mu.counts[k] != it->second) ++mismatches;
    }
  }

  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> sz(0, 25);
  int dist_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Complex> A(static_cast<std::size_t>(sz(rng))), B(static_cast<std::size_t>(sz(rng)));
    for (auto& a : A) a = {u(rng), u(rng)};
    for (auto& b : B) b = {u(rng), u(rng)};
    const Complex c(0.3 * u(rng), 0.3 * u(rng));
    const double r = 0.2 + std::abs(u(rng));
    double dab = 0.0, dba = 0.0;
    for (const auto& a : A) {
      if (!(std::abs(a - c) < r)) continue;
      double m = std::numeric_limits<double>::infinity();
      for (const auto& b : B) m = std::min(m, std::abs(a - b));
      dab = std::max(dab, m);
    }
    for (const auto& b : B) {
      if (!(std::abs(b - c) < r)) continue;
      double m = std::numeric_limits<double>::infinity();
      for (const auto& a : A) m = std::min(m, std::abs(a - b));
      dba = std::max(dba, m);
    }
    const Distance d = dist_in(A, B, c, r);
    if (d.d_ab != dab || d.d_ba != dba || d.d != std::max(dab, dba)) ++dist_mismatch;
  }
  report(8, "oracle equivalence", mismatches == 0 && dist_mismatch == 0,
         fmt("lattice/mu cases compared %d, mismatches %d; dist_in random sets 100, mismatches %d", compared,
             mismatches, dist_mismatch));
}

void criterion9() {
  TrappedOptions to;
  to.jobs = 0;
  const std::uint64_t seed = 20240611;
  std::string detail;
  bool pass = true;
  for (const char* family : {"gaussian_barrier", "eckart"}) {
    const Potential V = builtin(family);
    const TrappedReport r = trapped_diagnostic(V, 1.0, 3.0, 50.0, 200, seed, to);
    pass = pass && r.evaluated > 0 && r.trapped == 0;
    detail += fmt("%s %d/%d trapped; ", family, r.trapped, r.evaluated);
  }
  const Potential W = builtin("trapping_counterexample");
  const TrappedReport w = trapped_diagnostic(W, 1.0, 7.0, 50.0, 200, seed, to);
  pass = pass && w.trapped_fraction && *w.trapped_fraction > 0.0;
  detail += fmt("trapping_counterexample %d/%d trapped (fraction %.3f)", w.trapped, w.evaluated,
                w.trapped_fraction.value_or(0.0));
  report(9, "hypothesis diagnostics", pass, detail);
}

}  // namespace

int main() {
  const std::vector<void (*)()> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                            criterion6, criterion7, criterion8, criterion9};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), "error", false, e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
