#pragma once

#include <complex>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resolab/series.hpp"

namespace resolab {

using Complex = std::complex<double>;

/// Which complex distortions a potential admits.
enum class Analyticity {
  /// Analytic in the closed sector swept by x -> x e^{i theta}, 0 <= theta < pi/4;
  /// global rotation is admissible.
  EntireDecaying,
  /// Analytic only outside a compact set; requires exterior scaling.
  SectorOnly,
};

/// Formula backend of a potential; one evaluation per scalar type.
class PotentialModel {
 public:
  virtual ~PotentialModel() = default;
  virtual double eval(std::span<const double> x) const = 0;
  virtual Complex eval(std::span<const Complex> x) const = 0;
  virtual Jet eval(std::span<const Jet> x) const = 0;
  virtual Series eval(std::span<const Series> x) const = 0;
};

/// Immutable scalar field V on R^n (n = 1, 2) with exact derivatives.
class Potential {
 public:
  Potential(std::string name, int dimension, Analyticity analyticity, bool decays,
            std::shared_ptr<const PotentialModel> model, std::string caveat = {});

  const std::string& name() const { return name_; }
  int dimension() const { return dimension_; }
  Analyticity analyticity() const { return analyticity_; }
  /// V -> 0 at infinity.
  bool decays() const { return decays_; }
  /// Free-text note recorded for families that break a standing hypothesis.
  const std::string& caveat() const { return caveat_; }

  double value(std::span<const double> x) const;
  Complex value(std::span<const Complex> x) const;
  double value(double x) const { return value(std::span<const double>(&x, 1)); }
  Complex value(Complex x) const { return value(std::span<const Complex>(&x, 1)); }

  Eigen::VectorXd gradient(std::span<const double> x) const;
  Eigen::MatrixXd hessian(std::span<const double> x) const;

  /// Taylor coefficients of y -> V(center + axes * y) up to total degree `order`.
  /// `axes` defaults to the identity.
  Series taylor(std::span<const double> center, int order,
                const Eigen::MatrixXd* axes = nullptr) const;

  static constexpr int kMaxTaylorOrder = 64;

 private:
  void check_dim(std::size_t n) const;

  std::string name_;
  int dimension_;
  Analyticity analyticity_;
  bool decays_;
  std::shared_ptr<const PotentialModel> model_;
  std::string caveat_;
};

/// Adapts a formula object with a member template `S operator()(std::span<const S>)`
/// to the PotentialModel interface.
template <class F>
class FormulaModel final : public PotentialModel {
 public:
  explicit FormulaModel(F f) : f_(std::move(f)) {}
  double eval(std::span<const double> x) const override { return f_(x); }
  Complex eval(std::span<const Complex> x) const override { return f_(x); }
  Jet eval(std::span<const Jet> x) const override { return f_(x); }
  Series eval(std::span<const Series> x) const override { return f_(x); }

 private:
  F f_;
};

template <class F>
Potential make_potential(std::string name, int dimension, Analyticity analyticity, bool decays,
                         F formula, std::string caveat = {}) {
  return Potential(std::move(name), dimension, analyticity, decays,
                   std::make_shared<FormulaModel<F>>(std::move(formula)), std::move(caveat));
}

using ParamMap = std::map<std::string, double>;

/// Names accepted by `builtin`.
std::vector<std::string> builtin_names();

/// Builtin barrier families:
///   inverted_parabola            V = -x^2
///   gaussian_barrier             V = E0 exp(-c x^2)                      {E0, c}
///   eckart                       V = V0 / cosh^2(alpha x)                {V0, alpha}
///   gaussian_2d_anisotropic      V = E0 exp(-c1 x1^2 - c2 x2^2)          {E0, c1, c2}
///   compact_bump_plus_gaussian   gaussian plus a C-infinity bump         {E0, c, amplitude, center, width}
///   free                         V = 0                                   {dimension}
///   trapping_counterexample      gaussian plus two walls of height > E0  {E0, c, wall_height, wall_left, wall_right, wall_c}
/// Missing parameters take family defaults; unknown keys are rejected.
Potential builtin(const std::string& name, const ParamMap& params = {});

/// Barrier-top data at a non-degenerate maximum.
struct BarrierData {
  Eigen::VectorXd critical_point;
  double energy = 0.0;  // E0
  /// Ascending, lambda_j = sqrt(-2 mu_j) for Hessian eigenvalues mu_j.
  Eigen::VectorXd lambda;
  Eigen::MatrixXd hessian;
  /// Column j is the unit Hessian eigenvector belonging to lambda(j).
  Eigen::MatrixXd axes;
  int newton_iterations = 0;

  int dimension() const { return static_cast<int>(lambda.size()); }
};

struct NewtonOptions {
  double tolerance = 1e-12;
  int max_iterations = 50;
};

/// Newton iteration on grad V from `guess`; throws NumericalError on
/// non-convergence and ValidationError when the critical point is not a
/// non-degenerate maximum.
BarrierData find_barrier(const Potential& V, std::span<const double> guess,
                         const NewtonOptions& options = {});

/// Barrier data built directly from E0 and frequencies (critical point at 0,
/// axes = identity). Used where only the harmonic data matter.
BarrierData barrier_from_frequencies(double energy, std::vector<double> lambda);

/// V(x e^{i theta}); requires the EntireDecaying flag and 0 <= theta <= pi/4.
Complex rotate_eval(const Potential& V, std::span<const double> x, double theta);
Complex rotate_eval(const Potential& V, double x, double theta);

}  // namespace resolab
