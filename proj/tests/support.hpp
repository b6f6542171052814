#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "resolab/potential.hpp"
#include "resolab/spectral.hpp"

namespace testing_support {

using resolab::Complex;

/// V = x^2, the harmonic oscillator used as a spectral oracle.
struct Harmonic {
  template <class S>
  S operator()(std::span<const S> x) const {
    return x[0] * x[0];
  }
};

/// V = +x^2 has a minimum, not a barrier.
inline resolab::Potential harmonic() {
  return resolab::make_potential("harmonic", 1, resolab::Analyticity::EntireDecaying, false, Harmonic{});
}

inline resolab::BarrierData barrier(const resolab::Potential& V) {
  const std::vector<double> guess(static_cast<std::size_t>(V.dimension()), 0.0);
  return resolab::find_barrier(V, guess);
}

inline resolab::SpectralConfig fixed_config(int points, double half_width, double theta, int fd_order = 4) {
  resolab::SpectralConfig c;
  c.grid.points = points;
  c.grid.half_width = half_width;
  c.assemble.fd_order = fd_order;
  c.theta.kind = resolab::ThetaPolicy::Kind::Fixed;
  c.theta.value = theta;
  return c;
}

}  // namespace testing_support
