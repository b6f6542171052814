#include "resolab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace resolab {

namespace {

struct InvertedParabola {
  template <class S>
  S operator()(std::span<const S> x) const {
    return -(x[0] * x[0]);
  }
};

struct GaussianBarrier {
  double e0, c;
  template <class S>
  S operator()(std::span<const S> x) const {
    using std::exp;
    return e0 * exp(-c * (x[0] * x[0]));
  }
};

struct Eckart {
  double v0, alpha;
  template <class S>
  S operator()(std::span<const S> x) const {
    using std::cosh;
    const S ch = cosh(alpha * x[0]);
    return v0 / (ch * ch);
  }
};

struct Gaussian2D {
  double e0, c1, c2;
  template <class S>
  S operator()(std::span<const S> x) const {
    using std::exp;
    return e0 * exp(-c1 * (x[0] * x[0]) - c2 * (x[1] * x[1]));
  }
};

// exp(1 - 1/(1 - t^2)) on |t| < 1, zero elsewhere; peak value 1 at t = 0.
double bump(double t) { return std::abs(t) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t * t)) : 0.0; }

Jet bump(const Jet& t) {
  if (std::abs(t.v) >= 1.0) return Jet(0.0);
  const double q = 1.0 - t.v * t.v;
  const double b = std::exp(1.0 - 1.0 / q);
  const double db = b * (-2.0 * t.v) / (q * q);
  return {b, {db * t.d[0], db * t.d[1]}};
}

Series bump(const Series& t) {
  if (std::abs(t.constant_term()) >= 1.0) return t * 0.0;
  return exp(1.0 - reciprocal(1.0 - t * t));
}

Complex bump(const Complex& t) {
  if (t.imag() == 0.0) return bump(t.real());
  if (std::abs(t.real()) >= 1.0) return 0.0;
  throw ValidationError("compact bump evaluated at a complex point inside its support; "
                        "the exterior-scaling inner radius must enclose the bump");
}

struct CompactBumpPlusGaussian {
  double e0, c, amplitude, center, width;
  template <class S>
  S operator()(std::span<const S> x) const {
    using std::exp;
    const S t = (x[0] - center) * (1.0 / width);
    return e0 * exp(-c * (x[0] * x[0])) + amplitude * bump(t);
  }
};

struct Free {
  template <class S>
  S operator()(std::span<const S> x) const {
    return x[0] * 0.0;
  }
};

struct Free2 {
  template <class S>
  S operator()(std::span<const S> x) const {
    return x[0] * 0.0 + x[1] * 0.0;
  }
};

struct TrappingCounterexample {
  double e0, c, wall_height, wall_left, wall_right, wall_c;
  template <class S>
  S operator()(std::span<const S> x) const {
    using std::exp;
    const S dl = x[0] - wall_left;
    const S dr = x[0] - wall_right;
    return e0 * exp(-c * (x[0] * x[0])) +
           wall_height * (exp(-wall_c * (dl * dl)) + exp(-wall_c * (dr * dr)));
  }
};

class Params {
 public:
  Params(std::string family, const ParamMap& given, ParamMap defaults)
      : family_(std::move(family)), values_(std::move(defaults)) {
    for (const auto& [key, value] : given) {
      if (!values_.contains(key))
        throw ValidationError("unknown parameter '" + key + "' for potential family '" + family_ + "'");
      values_[key] = value;
    }
  }
  double positive(const std::string& key) const {
    const double v = values_.at(key);
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError("parameter '" + key + "' of potential family '" + family_ +
                            "' must be positive");
    return v;
  }
  double non_negative(const std::string& key) const {
    const double v = values_.at(key);
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("parameter '" + key + "' of potential family '" + family_ +
                            "' must be non-negative");
    return v;
  }
  double any(const std::string& key) const { return values_.at(key); }

 private:
  std::string family_;
  ParamMap values_;
};

}  // namespace

Potential::Potential(std::string name, int dimension, Analyticity analyticity, bool decays,
                     std::shared_ptr<const PotentialModel> model, std::string caveat)
    : name_(std::move(name)),
      dimension_(dimension),
      analyticity_(analyticity),
      decays_(decays),
      model_(std::move(model)),
      caveat_(std::move(caveat)) {
  if (dimension_ < 1 || dimension_ > 2) throw ValidationError("potential dimension must be 1 or 2");
  if (!model_) throw ValidationError("potential model must not be null");
}

void Potential::check_dim(std::size_t n) const {
  if (n != static_cast<std::size_t>(dimension_))
    throw ValidationError("point dimension " + std::to_string(n) + " does not match potential '" +
                          name_ + "' of dimension " + std::to_string(dimension_));
}

double Potential::value(std::span<const double> x) const {
  check_dim(x.size());
  return model_->eval(x);
}

Complex Potential::value(std::span<const Complex> x) const {
  check_dim(x.size());
  return model_->eval(x);
}

Eigen::VectorXd Potential::gradient(std::span<const double> x) const {
  check_dim(x.size());
  std::array<Jet, 2> jets;
  for (std::size_t i = 0; i < x.size(); ++i) {
    jets[i].v = x[i];
    jets[i].d[i] = 1.0;
  }
  const Jet v = model_->eval(std::span<const Jet>(jets.data(), x.size()));
  Eigen::VectorXd g(dimension_);
  for (int i = 0; i < dimension_; ++i) g(i) = v.d[static_cast<std::size_t>(i)];
  return g;
}

Eigen::MatrixXd Potential::hessian(std::span<const double> x) const {
  const Series s = taylor(x, 2);
  Eigen::MatrixXd H(dimension_, dimension_);
  for (int i = 0; i < dimension_; ++i)
    for (int j = 0; j < dimension_; ++j) {
      MultiIndex alpha(static_cast<std::size_t>(dimension_), 0);
      alpha[static_cast<std::size_t>(i)] += 1;
      alpha[static_cast<std::size_t>(j)] += 1;
      H(i, j) = (i == j ? 2.0 : 1.0) * s[alpha];
    }
  return H;
}

Series Potential::taylor(std::span<const double> center, int order, const Eigen::MatrixXd* axes) const {
  check_dim(center.size());
  if (order < 0 || order > kMaxTaylorOrder)
    throw ValidationError("Taylor order " + std::to_string(order) + " outside [0, " +
                          std::to_string(kMaxTaylorOrder) + "]");
  const int n = dimension_;
  std::vector<Series> xs;
  xs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Series xi = Series::constant(n, order, center[static_cast<std::size_t>(i)]);
    for (int j = 0; j < n; ++j) {
      const double a = axes ? (*axes)(i, j) : (i == j ? 1.0 : 0.0);
      if (a != 0.0) xi += Series::variable(n, order, j, 0.0) * a;
    }
    xs.push_back(std::move(xi));
  }
  return model_->eval(std::span<const Series>(xs));
}

std::vector<std::string> builtin_names() {
  return {"inverted_parabola", "gaussian_barrier",        "eckart", "gaussian_2d_anisotropic",
          "compact_bump_plus_gaussian", "free", "trapping_counterexample"};
}

Potential builtin(const std::string& name, const ParamMap& params) {
  if (name == "inverted_parabola") {
    Params p(name, params, {});
    return make_potential(name, 1, Analyticity::EntireDecaying, false, InvertedParabola{},
                          "V = -x^2 does not decay at infinity; results depend on a truncating box "
                          "and must be checked for box-size convergence");
  }
  if (name == "gaussian_barrier") {
    Params p(name, params, {{"E0", 1.0}, {"c", 1.0}});
    return make_potential(name, 1, Analyticity::EntireDecaying, true,
                          GaussianBarrier{p.positive("E0"), p.positive("c")});
  }
  if (name == "eckart") {
    Params p(name, params, {{"V0", 1.0}, {"alpha", 1.0}});
    // Poles of sech^2 lie on the imaginary axis, outside every rotation sector.
    return make_potential(name, 1, Analyticity::EntireDecaying, true,
                          Eckart{p.positive("V0"), p.positive("alpha")});
  }
  if (name == "gaussian_2d_anisotropic") {
    Params p(name, params, {{"E0", 1.0}, {"c1", 0.5}, {"c2", 2.0}});
    return make_potential(name, 2, Analyticity::EntireDecaying, true,
                          Gaussian2D{p.positive("E0"), p.positive("c1"), p.positive("c2")});
  }
  if (name == "compact_bump_plus_gaussian") {
    Params p(name, params,
             {{"E0", 1.0}, {"c", 1.0}, {"amplitude", 0.3}, {"center", 2.5}, {"width", 0.5}});
    const double center = p.positive("center");
    const double width = p.positive("width");
    if (width >= center)
      throw ValidationError("compact_bump_plus_gaussian: bump support must stay away from 0 (width < center)");
    return make_potential(name, 1, Analyticity::SectorOnly, true,
                          CompactBumpPlusGaussian{p.positive("E0"), p.positive("c"),
                                                  p.non_negative("amplitude"), center, width});
  }
  if (name == "free") {
    Params p(name, params, {{"dimension", 1.0}});
    const double d = p.any("dimension");
    if (d != 1.0 && d != 2.0) throw ValidationError("free: dimension must be 1 or 2");
    if (d == 2.0) {
      return make_potential(name, 2, Analyticity::EntireDecaying, true, Free2{});
    }
    return make_potential(name, 1, Analyticity::EntireDecaying, true, Free{});
  }
  if (name == "trapping_counterexample") {
    Params p(name, params,
             {{"E0", 1.0}, {"c", 1.0}, {"wall_height", 1.5}, {"wall_left", 3.0},
              {"wall_right", 6.0}, {"wall_c", 4.0}});
    const double e0 = p.positive("E0");
    const double wall = p.positive("wall_height");
    if (wall <= e0)
      throw ValidationError("trapping_counterexample: wall_height must exceed E0 to trap at energy E0");
    const double left = p.positive("wall_left");
    const double right = p.positive("wall_right");
    if (right <= left) throw ValidationError("trapping_counterexample: wall_right must exceed wall_left");
    return make_potential(name, 1, Analyticity::EntireDecaying, true,
                          TrappingCounterexample{e0, p.positive("c"), wall, left, right,
                                                 p.positive("wall_c")},
                          "violates the non-trapping hypothesis on purpose (classically trapped well)");
  }
  throw ValidationError("unknown potential family '" + name + "'");
}

BarrierData find_barrier(const Potential& V, std::span<const double> guess, const NewtonOptions& options) {
  const int n = V.dimension();
  if (guess.size() != static_cast<std::size_t>(n))
    throw ValidationError("find_barrier: guess has dimension " + std::to_string(guess.size()) +
                          ", potential has " + std::to_string(n));
  std::vector<double> x(guess.begin(), guess.end());
  int it = 0;
  bool converged = false;
  for (; it <= options.max_iterations; ++it) {
    const Eigen::VectorXd g = V.gradient(x);
    if (g.lpNorm<Eigen::Infinity>() <= options.tolerance) {
      converged = true;
      break;
    }
    if (it == options.max_iterations) break;
    const Eigen::MatrixXd H = V.hessian(x);
    const Eigen::VectorXd step = H.fullPivLu().solve(g);
    if (!step.allFinite()) break;
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] -= step(i);
    if (step.lpNorm<Eigen::Infinity>() <= options.tolerance * 1e-3) {
      converged = V.gradient(x).lpNorm<Eigen::Infinity>() <= options.tolerance;
      ++it;
      break;
    }
  }
  if (!converged)
    throw NumericalError("find_barrier: Newton iteration did not converge in " +
                         std::to_string(options.max_iterations) + " iterations");

  BarrierData bd;
  bd.critical_point = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  bd.energy = V.value(std::span<const double>(x));
  bd.hessian = V.hessian(x);
  bd.newton_iterations = it;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bd.hessian);
  const Eigen::VectorXd mu = es.eigenvalues();  // ascending
  if (mu.maxCoeff() >= 0.0)
    throw ValidationError("find_barrier: critical point is not a maximum (Hessian not negative definite)");
  // Most negative mu gives the largest lambda; reverse for ascending lambda.
  bd.lambda.resize(n);
  bd.axes.resize(n, n);
  for (int j = 0; j < n; ++j) {
    const int src = n - 1 - j;
    bd.lambda(j) = std::sqrt(-2.0 * mu(src));
    bd.axes.col(j) = es.eigenvectors().col(src);
  }
  return bd;
}

BarrierData barrier_from_frequencies(double energy, std::vector<double> lambda) {
  if (lambda.empty() || lambda.size() > 2) throw ValidationError("lambda must have 1 or 2 entries");
  std::sort(lambda.begin(), lambda.end());
  for (double l : lambda)
    if (!(l > 0.0)) throw ValidationError("lambda entries must be positive");
  const int n = static_cast<int>(lambda.size());
  BarrierData bd;
  bd.critical_point = Eigen::VectorXd::Zero(n);
  bd.energy = energy;
  bd.lambda = Eigen::Map<const Eigen::VectorXd>(lambda.data(), n);
  bd.hessian = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) bd.hessian(j, j) = -0.5 * lambda[static_cast<std::size_t>(j)] * lambda[static_cast<std::size_t>(j)];
  bd.axes = Eigen::MatrixXd::Identity(n, n);
  return bd;
}

Complex rotate_eval(const Potential& V, std::span<const double> x, double theta) {
  if (V.analyticity() != Analyticity::EntireDecaying)
    throw ValidationError("rotate_eval: potential '" + V.name() +
                          "' is only analytic outside a compact set; use exterior scaling");
  if (!(theta >= 0.0 && theta <= std::numbers::pi / 4))
    throw ValidationError("rotate_eval: theta must lie in [0, pi/4]");
  const Complex e = std::polar(1.0, theta);
  std::array<Complex, 2> z{};
  for (std::size_t i = 0; i < x.size() && i < 2; ++i) z[i] = x[i] * e;
  return V.value(std::span<const Complex>(z.data(), x.size()));
}

Complex rotate_eval(const Potential& V, double x, double theta) {
  return rotate_eval(V, std::span<const double>(&x, 1), theta);
}

}  // namespace resolab
