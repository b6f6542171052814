#include "resolab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "resolab/parallel.hpp"

namespace resolab {

namespace {

double nearest(Complex a, std::span<const Complex> B, Complex* which = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : B) {
    const double d = std::abs(a - b);
    if (d < best) {
      best = d;
      if (which) *which = b;
    }
  }
  return best;
}

double one_sided(std::span<const Complex> A, std::span<const Complex> B, Complex center, double radius) {
  double d = 0.0;
  for (const auto& a : A)
    if (std::abs(a - center) < radius) d = std::max(d, nearest(a, B));
  return d;
}

}  // namespace

Distance dist_in(std::span<const Complex> A, std::span<const Complex> B, Complex center, double radius) {
  Distance r;
  r.d_ab = one_sided(A, B, center, radius);
  r.d_ba = one_sided(B, A, center, radius);
  r.d = std::max(r.d_ab, r.d_ba);
  return r;
}

MatchReport match(std::span<const Complex> resonances, const PseudoResonanceLattice& lattice,
                  double match_radius_in_h) {
  MatchReport rep;
  rep.h = lattice.h;
  rep.E0 = lattice.E0;
  rep.C = lattice.C;
  const std::vector<Complex> lat = lattice.values();
  const Distance d = dist_in(resonances, lat, lattice.E0, lattice.C * lattice.h);
  rep.d_rl = d.d_ab;
  rep.d_lr = d.d_ba;
  rep.d = d.d;
  const double tol = match_radius_in_h * lattice.h;
  for (const auto& z : resonances) {
    if (!(std::abs(z - lattice.E0) < lattice.C * lattice.h)) continue;
    MatchPair p;
    p.z = z;
    p.distance = nearest(z, lat, &p.w);
    if (p.distance > tol) rep.unmatched_resonances.push_back(z);
    rep.pairs.push_back(p);
  }
  for (const auto& w : lat)
    if (nearest(w, resonances) > tol) rep.unmatched_lattice.push_back(w);
  return rep;
}

LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("fit_loglog: sizes differ");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  LineFit f;
  f.used = static_cast<int>(lx.size());
  if (lx.size() < 2) {
    f.slope = f.intercept = std::numeric_limits<double>::quiet_NaN();
    return f;
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (f.slope * lx[i] + f.intercept);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

bool SweepResult::ratio_strictly_decreasing() const {
  int seen = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) {
    if (e.flagged) return false;
    if (!(e.d_over_h < prev)) return false;
    prev = e.d_over_h;
    ++seen;
  }
  return seen >= 2;
}

double SweepResult::max_successive_ratio() const {
  double worst = 0.0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const double a = entries[i - 1].d_over_h;
    const double b = entries[i].d_over_h;
    worst = std::max(worst, a > 0.0 ? b / a : std::numeric_limits<double>::infinity());
  }
  return worst;
}

SweepResult h_sweep(const Potential& V, const BarrierData& bd, double C, std::span<const double> h_list,
                    const SpectralConfig& config, int jobs) {
  if (h_list.size() < 3) throw ValidationError("h_sweep: need at least 3 values of h");
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    if (!(h_list[i] > 0.0)) throw ValidationError("h_sweep: h values must be positive");
    if (i > 0 && !(h_list[i] < h_list[i - 1])) throw ValidationError("h_sweep: h list must be strictly decreasing");
  }
  if (bd.dimension() != V.dimension()) throw ValidationError("h_sweep: barrier data dimension mismatch");

  SweepResult sr;
  sr.potential = V.name();
  sr.C = C;
  sr.entries.resize(h_list.size());
  parallel_for(h_list.size(), jobs, [&](std::size_t i) {
    const double h = h_list[i];
    SweepEntry& e = sr.entries[i];
    e.h = h;
    try {
      e.resonances = resonances(V, bd.energy, h, C, config);
    } catch (const NumericalError& ex) {
      throw NumericalError("h = " + std::to_string(h) + ": " + ex.what());
    } catch (const ValidationError& ex) {
      throw ValidationError("h = " + std::to_string(h) + ": " + ex.what());
    }
    e.theta = e.resonances.theta;
    const PseudoResonanceLattice lat = pseudo_resonances(bd, h, C);
    const std::vector<Complex> z = e.resonances.values();
    e.report = match(z, lat);
    e.d = e.report.d;
    e.d_over_h = e.d / h;
    e.resonance_count = static_cast<int>(z.size());
    e.lattice_count = static_cast<int>(lat.points.size());
    e.flagged = z.empty();
  });

  std::vector<double> hs, ds;
  bool exact = true;
  for (const auto& e : sr.entries) {
    if (e.flagged) {
      std::ostringstream os;
      os << "h = " << e.h << ": no resonance in the window (grid or box insufficient); excluded from the fit";
      sr.warnings.push_back(os.str());
      continue;
    }
    hs.push_back(e.h);
    ds.push_back(e.d);
    exact = exact && e.d <= config.stability.stab_tol * e.h;
  }
  sr.fit = fit_loglog(hs, ds);
  sr.exact_family = exact && !hs.empty();
  if (sr.exact_family) sr.warnings.push_back("exact family: d(h) is at the discretization floor, q is not meaningful");
  return sr;
}

ResolventProfile resolvent_scan(const Potential& V, const BarrierData& bd, double h, double C, const LineSpec& line,
                                const SpectralConfig& config, const ScanOptions& options) {
  if (line.samples < 3) throw ValidationError("resolvent_scan: need at least 3 samples");
  if (!(h > 0.0) || !(C > 0.0)) throw ValidationError("resolvent_scan: h and C must be positive");
  const Complex start = line.start.value_or(Complex(bd.energy, 0.0));
  const Complex end = line.end.value_or(Complex(bd.energy, -C * h));

  const DistortionSpec spec = config.distortion_for(h);
  const DistortedOperator op = assemble(V, h, spec, config.grid, config.assemble);
  ProbeOptions po = options.probe;
  if (po.center.size() == 0) po.center = bd.critical_point;

  ResolventProfile prof;
  prof.h = h;
  prof.theta = spec.theta;
  prof.E0 = bd.energy;
  prof.C = C;
  const int n = line.samples;
  prof.points.resize(static_cast<std::size_t>(n));

  const PseudoResonanceLattice lat = pseudo_resonances(bd, h, C);
  std::vector<double> ordinates;
  for (const auto& p : lat.points) ordinates.push_back(p.z.imag());
  const bool vertical = std::abs(end.real() - start.real()) <= 1e-14 * std::max(1.0, std::abs(start.real()));
  if (vertical) {
    const double lo = std::min(start.imag(), end.imag());
    const double hi = std::max(start.imag(), end.imag());
    for (std::size_t k = 1; k < ordinates.size(); ++k) {
      const double mid = 0.5 * (ordinates[k - 1] + ordinates[k]);
      if (mid >= lo && mid <= hi) prof.midpoints.push_back({Complex(start.real(), mid)});
    }
  }

  const std::size_t total = prof.points.size() + prof.midpoints.size();
  parallel_for(total, options.jobs, [&](std::size_t i) {
    ProfilePoint& p = i < prof.points.size() ? prof.points[i] : prof.midpoints[i - prof.points.size()];
    if (i < prof.points.size()) p.z = start + (end - start) * (static_cast<double>(i) / (n - 1));
    const ResolventEstimate est = resolvent_probe(op, p.z, options.cutoff_radius, po);
    p.norm = est.norm;
    p.at_resonance = est.at_resonance;
    p.iterations = est.iterations;
  });

  // Samples within h/2 on either side bound the prominence test.
  const double step = std::abs(end - start) / (n - 1);
  const int w = std::max(1, static_cast<int>(std::lround(0.5 * h / std::max(step, 1e-300))));
  auto value = [&](int i) {
    const auto& p = prof.points[static_cast<std::size_t>(i)];
    return p.at_resonance ? std::numeric_limits<double>::infinity() : p.norm;
  };
  for (int i = 0; i < n; ++i) {
    const double v = value(i);
    const bool left_ok = i == 0 || v > value(i - 1);
    const bool right_ok = i == n - 1 || v >= value(i + 1);
    if (!left_ok || !right_ok || i == 0 || i == n - 1) continue;
    double lmin = v, rmin = v;
    for (int j = std::max(0, i - w); j < i; ++j) lmin = std::min(lmin, value(j));
    for (int j = i + 1; j <= std::min(n - 1, i + w); ++j) rmin = std::min(rmin, value(j));
    if (!(v >= options.prominence * std::max(lmin, rmin))) continue;
    Peak pk;
    pk.z = prof.points[static_cast<std::size_t>(i)].z;
    pk.norm = v;
    pk.saturated = prof.points[static_cast<std::size_t>(i)].at_resonance;
    double above = 0.0, below = 0.0;
    double best_above = std::numeric_limits<double>::infinity(), best_below = best_above;
    for (const auto& m : prof.midpoints) {
      const double dy = m.z.imag() - pk.z.imag();
      if (dy > 0 && dy < best_above) {
        best_above = dy;
        above = m.norm;
      }
      if (dy < 0 && -dy < best_below) {
        best_below = -dy;
        below = m.norm;
      }
    }
    const double ref = std::max(above, below);
    pk.midpoint_ratio = ref > 0.0 ? v / ref : std::numeric_limits<double>::quiet_NaN();
    prof.peaks.push_back(pk);
  }

  std::vector<Complex> peak_ord, lat_ord;
  for (const auto& pk : prof.peaks) peak_ord.emplace_back(0.0, pk.z.imag());
  for (double o : ordinates) lat_ord.emplace_back(0.0, o);
  const double lo = std::min(start.imag(), end.imag());
  const double hi = std::max(start.imag(), end.imag());
  prof.ordinate_distance =
      dist_in(peak_ord, lat_ord, Complex(0.0, 0.5 * (lo + hi)), 0.5 * (hi - lo) * (1.0 + 1e-12) + 1e-15);
  return prof;
}

}  // namespace resolab
