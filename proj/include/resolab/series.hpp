#pragma once

// Truncated multivariate Taylor series (at most two variables) and a
// first-order jet type. Both are used as scalar types when evaluating the
// builtin potential formulas, which gives exact derivatives and Taylor
// coefficients without finite differences.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "resolab/error.hpp"

namespace resolab {

/// Multi-index alpha in N^n, n in {1, 2}.
using MultiIndex = std::vector<int>;

inline int total_degree(const MultiIndex& alpha) {
  int s = 0;
  for (int a : alpha) s += a;
  return s;
}

/// Visits every multi-index of length `nvars` with total degree <= `order`,
/// ordered by total degree, then lexicographically (descending first entry).
inline void for_each_multi_index(int nvars, int order,
                                 const std::function<void(const MultiIndex&)>& fn) {
  MultiIndex alpha(static_cast<std::size_t>(nvars), 0);
  for (int d = 0; d <= order; ++d) {
    if (nvars == 1) {
      alpha[0] = d;
      fn(alpha);
    } else {
      for (int i = d; i >= 0; --i) {
        alpha[0] = i;
        alpha[1] = d - i;
        fn(alpha);
      }
    }
  }
}

template <class T>
class TaylorSeries {
 public:
  TaylorSeries() = default;
  TaylorSeries(int nvars, int order)
      : nvars_(nvars), order_(order), c_(storage_size(nvars, order), T{}) {
    if (nvars < 1 || nvars > 2) throw ValidationError("TaylorSeries supports 1 or 2 variables");
    if (order < 0) throw ValidationError("TaylorSeries order must be non-negative");
  }

  static TaylorSeries constant(int nvars, int order, T value) {
    TaylorSeries s(nvars, order);
    s.c_[0] = value;
    return s;
  }

  /// value + y_j
  static TaylorSeries variable(int nvars, int order, int j, T value) {
    TaylorSeries s = constant(nvars, order, value);
    if (order >= 1) {
      MultiIndex e(static_cast<std::size_t>(nvars), 0);
      e[static_cast<std::size_t>(j)] = 1;
      s[e] = T{1};
    }
    return s;
  }

  int nvars() const { return nvars_; }
  int order() const { return order_; }

  T& operator[](const MultiIndex& alpha) { return c_[index(alpha)]; }
  const T& operator[](const MultiIndex& alpha) const { return c_[index(alpha)]; }

  /// Coefficient, or zero when the degree exceeds the truncation order.
  T coefficient(const MultiIndex& alpha) const {
    for (int a : alpha)
      if (a < 0) return T{};
    if (total_degree(alpha) > order_) return T{};
    return c_[index(alpha)];
  }

  const T& constant_term() const { return c_[0]; }
  T& constant_term() { return c_[0]; }

  TaylorSeries& operator+=(const TaylorSeries& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  TaylorSeries& operator-=(const TaylorSeries& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  TaylorSeries& operator+=(T v) {
    c_[0] += v;
    return *this;
  }
  TaylorSeries& operator-=(T v) {
    c_[0] -= v;
    return *this;
  }
  TaylorSeries& operator*=(T v) {
    for (auto& x : c_) x *= v;
    return *this;
  }

  friend TaylorSeries operator+(TaylorSeries a, const TaylorSeries& b) { return a += b; }
  friend TaylorSeries operator-(TaylorSeries a, const TaylorSeries& b) { return a -= b; }
  friend TaylorSeries operator+(TaylorSeries a, T v) { return a += v; }
  friend TaylorSeries operator+(T v, TaylorSeries a) { return a += v; }
  friend TaylorSeries operator-(TaylorSeries a, T v) { return a -= v; }
  friend TaylorSeries operator-(T v, TaylorSeries a) { return (-a) += v; }
  friend TaylorSeries operator*(TaylorSeries a, T v) { return a *= v; }
  friend TaylorSeries operator*(T v, TaylorSeries a) { return a *= v; }
  friend TaylorSeries operator/(TaylorSeries a, T v) { return a *= T{1} / v; }
  friend TaylorSeries operator-(TaylorSeries a) {
    for (auto& x : a.c_) x = -x;
    return a;
  }

  friend TaylorSeries operator*(const TaylorSeries& a, const TaylorSeries& b) {
    a.check_compatible(b);
    TaylorSeries r(a.nvars_, a.order_);
    const int K = a.order_;
    if (a.nvars_ == 1) {
      for (int i = 0; i <= K; ++i) {
        if (a.c_[i] == T{}) continue;
        for (int j = 0; i + j <= K; ++j) r.c_[i + j] += a.c_[i] * b.c_[j];
      }
      return r;
    }
    const int w = K + 1;
    for (int i1 = 0; i1 <= K; ++i1)
      for (int i2 = 0; i1 + i2 <= K; ++i2) {
        const T av = a.c_[i1 + w * i2];
        if (av == T{}) continue;
        for (int j1 = 0; i1 + i2 + j1 <= K; ++j1)
          for (int j2 = 0; i1 + i2 + j1 + j2 <= K; ++j2)
            r.c_[(i1 + j1) + w * (i2 + j2)] += av * b.c_[j1 + w * j2];
      }
    return r;
  }
  TaylorSeries& operator*=(const TaylorSeries& o) { return *this = *this * o; }

  friend TaylorSeries operator/(const TaylorSeries& a, const TaylorSeries& b) {
    return a * reciprocal(b);
  }
  friend TaylorSeries operator/(T v, const TaylorSeries& b) { return reciprocal(b) * v; }

  /// f(c + u) = sum_k derivs[k] / k! u^k where c is the constant term.
  /// `derivs` must hold f^(k)(c) for k = 0..order.
  TaylorSeries compose(std::span<const T> derivs) const {
    TaylorSeries u = *this;
    u.c_[0] = T{};
    TaylorSeries result = constant(nvars_, order_, derivs[0]);
    TaylorSeries power = constant(nvars_, order_, T{1});
    double factorial = 1.0;
    for (int k = 1; k <= order_; ++k) {
      power = power * u;
      factorial *= k;
      TaylorSeries term = power;
      term *= derivs[static_cast<std::size_t>(k)] / factorial;
      result += term;
    }
    return result;
  }

  /// Partial derivative in variable j (the top degree becomes zero).
  TaylorSeries derivative(int j) const {
    TaylorSeries r(nvars_, order_);
    for_each_multi_index(nvars_, order_ - 1, [&](const MultiIndex& alpha) {
      MultiIndex up = alpha;
      up[static_cast<std::size_t>(j)] += 1;
      r[alpha] = c_[index(up)] * static_cast<double>(up[static_cast<std::size_t>(j)]);
    });
    return r;
  }

  /// Copy truncated (or zero-extended) to another order.
  TaylorSeries with_order(int order) const {
    TaylorSeries r(nvars_, order);
    for_each_multi_index(nvars_, std::min(order, order_),
                         [&](const MultiIndex& alpha) { r[alpha] = (*this)[alpha]; });
    return r;
  }

  /// Sum of c_alpha y^alpha at a (possibly complex) point.
  template <class P>
  P evaluate(std::span<const P> y) const {
    P total{};
    for_each_multi_index(nvars_, order_, [&](const MultiIndex& alpha) {
      const T c = (*this)[alpha];
      if (c == T{}) return;
      P term = P(c);
      for (int v = 0; v < nvars_; ++v)
        for (int p = 0; p < alpha[static_cast<std::size_t>(v)]; ++p) term *= y[static_cast<std::size_t>(v)];
      total += term;
    });
    return total;
  }

 private:
  static std::size_t storage_size(int nvars, int order) {
    std::size_t w = static_cast<std::size_t>(order + 1);
    return nvars == 1 ? w : w * w;
  }
  std::size_t index(const MultiIndex& alpha) const {
    std::size_t i = static_cast<std::size_t>(alpha[0]);
    if (nvars_ == 2) i += static_cast<std::size_t>(order_ + 1) * static_cast<std::size_t>(alpha[1]);
    return i;
  }
  void check_compatible(const TaylorSeries& o) const {
    if (o.nvars_ != nvars_ || o.order_ != order_)
      throw ValidationError("TaylorSeries operands differ in shape");
  }

  int nvars_ = 1;
  int order_ = 0;
  std::vector<T> c_ = std::vector<T>(1, T{});
};

using Series = TaylorSeries<double>;

inline Series reciprocal(const Series& s) {
  const double c = s.constant_term();
  if (c == 0.0) throw NumericalError("reciprocal of a series with zero constant term");
  std::vector<double> d(static_cast<std::size_t>(s.order() + 1));
  double f = 1.0 / c;
  for (int k = 0; k <= s.order(); ++k) {
    d[static_cast<std::size_t>(k)] = f;
    f *= -(k + 1) / c;
  }
  return s.compose(d);
}

inline Series exp(const Series& s) {
  std::vector<double> d(static_cast<std::size_t>(s.order() + 1), std::exp(s.constant_term()));
  return s.compose(d);
}

inline Series cosh(const Series& s) {
  const double c = s.constant_term();
  std::vector<double> d(static_cast<std::size_t>(s.order() + 1));
  for (int k = 0; k <= s.order(); ++k) d[static_cast<std::size_t>(k)] = (k % 2 == 0) ? std::cosh(c) : std::sinh(c);
  return s.compose(d);
}

/// First-order forward-mode jet in up to two variables.
struct Jet {
  double v = 0.0;
  std::array<double, 2> d{0.0, 0.0};

  Jet() = default;
  Jet(double value) : v(value) {}  // NOLINT: implicit constants are intended
  Jet(double value, std::array<double, 2> grad) : v(value), d(grad) {}

  friend Jet operator+(Jet a, Jet b) { return {a.v + b.v, {a.d[0] + b.d[0], a.d[1] + b.d[1]}}; }
  friend Jet operator-(Jet a, Jet b) { return {a.v - b.v, {a.d[0] - b.d[0], a.d[1] - b.d[1]}}; }
  friend Jet operator-(Jet a) { return {-a.v, {-a.d[0], -a.d[1]}}; }
  friend Jet operator*(Jet a, Jet b) {
    return {a.v * b.v, {a.d[0] * b.v + a.v * b.d[0], a.d[1] * b.v + a.v * b.d[1]}};
  }
  friend Jet operator/(Jet a, Jet b) {
    const double inv = 1.0 / b.v;
    const double q = a.v * inv;
    return {q, {(a.d[0] - q * b.d[0]) * inv, (a.d[1] - q * b.d[1]) * inv}};
  }
  Jet& operator+=(Jet o) { return *this = *this + o; }
  Jet& operator-=(Jet o) { return *this = *this - o; }
  Jet& operator*=(Jet o) { return *this = *this * o; }
};

inline Jet exp(Jet a) {
  const double e = std::exp(a.v);
  return {e, {e * a.d[0], e * a.d[1]}};
}

inline Jet cosh(Jet a) {
  const double s = std::sinh(a.v);
  return {std::cosh(a.v), {s * a.d[0], s * a.d[1]}};
}

}  // namespace resolab
