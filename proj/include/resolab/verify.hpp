#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resolab/lattice.hpp"
#include "resolab/potential.hpp"
#include "resolab/spectral.hpp"

namespace resolab {

struct Distance {
  double d_ab = 0.0;
  double d_ba = 0.0;
  double d = 0.0;
};

/// d_ab = max over a in A inside the open disk of min_b |a - b| (0 when empty);
/// d_ba likewise; d = max.
Distance dist_in(std::span<const Complex> A, std::span<const Complex> B, Complex center, double radius);

struct MatchPair {
  Complex z;  // resonance
  Complex w;  // nearest lattice point
  double distance = 0.0;
};

struct MatchReport {
  double h = 0.0;
  double E0 = 0.0;
  double C = 0.0;
  std::vector<MatchPair> pairs;
  double d_rl = 0.0;
  double d_lr = 0.0;
  double d = 0.0;
  /// Points whose nearest partner is farther than match_radius.
  std::vector<Complex> unmatched_resonances;
  std::vector<Complex> unmatched_lattice;
};

/// Compares resonances with lattice points in B(E0, C h). Clusters count as one
/// point; a lattice point of any multiplicity is matched by any nearby resonance.
MatchReport match(std::span<const Complex> resonances, const PseudoResonanceLattice& lattice,
                  double match_radius_in_h = 0.5);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of log residuals
  int used = 0;
};

/// Least squares fit of log y = slope log x + intercept over positive pairs.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

struct SweepEntry {
  double h = 0.0;
  double theta = 0.0;
  double d = 0.0;
  double d_over_h = 0.0;
  int resonance_count = 0;
  int lattice_count = 0;
  /// Empty resonance set in the window; excluded from the fit.
  bool flagged = false;
  MatchReport report;
  ResonanceSet resonances;
};

struct SweepResult {
  std::string potential;
  double C = 0.0;
  std::vector<SweepEntry> entries;  // decreasing h
  LineFit fit;                      // d(h) ~ h^q
  /// Every d(h) sits at the stability threshold: the family is exact and q is meaningless.
  bool exact_family = false;
  std::vector<std::string> warnings;

  double q() const { return fit.slope; }
  /// d(h)/h strictly decreasing along the sweep.
  bool ratio_strictly_decreasing() const;
  /// Largest successive ratio (d/h)(h_{k+1}) / (d/h)(h_k).
  double max_successive_ratio() const;
};

SweepResult h_sweep(const Potential& V, const BarrierData& bd, double C, std::span<const double> h_list,
                    const SpectralConfig& config, int jobs = 1);

struct LineSpec {
  /// Samples z = start + t (end - start), t in [0, 1]; defaults to the
  /// segment from E0 down to E0 - i C h when left empty.
  std::optional<Complex> start;
  std::optional<Complex> end;
  int samples = 200;
};

struct ScanOptions {
  double cutoff_radius = 1.0;
  /// A local maximum is a peak when it exceeds the smaller side minimum
  /// within +-h/2 by this factor.
  double prominence = 2.0;
  int jobs = 1;
  ProbeOptions probe;
};

struct ProfilePoint {
  Complex z;
  double norm = 0.0;
  bool at_resonance = false;
  int iterations = 0;
};

struct Peak {
  Complex z;
  double norm = 0.0;
  bool saturated = false;
  /// Peak norm over the larger of the norms at the adjacent lattice midpoints.
  double midpoint_ratio = 0.0;
};

struct ResolventProfile {
  double h = 0.0;
  double theta = 0.0;
  double E0 = 0.0;
  double C = 0.0;
  std::vector<ProfilePoint> points;
  std::vector<Peak> peaks;
  /// Midpoints between consecutive lattice ordinates on the line and their norms.
  std::vector<ProfilePoint> midpoints;
  /// Peak ordinates vs lattice ordinates, as points i * Im(z - E0).
  Distance ordinate_distance;
};

ResolventProfile resolvent_scan(const Potential& V, const BarrierData& bd, double h, double C,
                                const LineSpec& line, const SpectralConfig& config, const ScanOptions& options = {});

}  // namespace resolab
