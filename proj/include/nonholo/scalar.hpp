#pragma once

// Second-order forward-mode differentiation.
//
// A Jet2<T> carries a value together with its gradient and Hessian with
// respect to a fixed set of seeded variables. Storage is dense; a jet with
// an empty gradient is a constant and mixes freely with jets of any size.
// Jet2<Jet2<double>> nests the algebra, which is how third derivatives are
// obtained where the chart-change check needs them.

#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/errors.hpp"

namespace nonholo {

template <typename T = double>
class Jet2;

template <typename S>
struct is_jet : std::false_type {};
template <typename T>
struct is_jet<Jet2<T>> : std::true_type {};

/// Innermost double of a (possibly nested) scalar.
inline double scalar_value(double x) { return x; }
template <typename T>
double scalar_value(const Jet2<T>& x) {
  return scalar_value(x.value());
}

template <typename T>
class Jet2 {
 public:
  using value_type = T;

  Jet2() : v_(T(0.0)) {}
  Jet2(const T& c) : v_(c) {}  // NOLINT: constants convert implicitly
  Jet2(double c)
    requires(!std::is_same_v<T, double>)
      : v_(T(c)) {}

  /// Variable number `index` out of `n` seeded variables.
  static Jet2 variable(const T& value, std::size_t n, std::size_t index) {
    Jet2 j(value);
    j.g_.assign(n, T(0.0));
    j.h_.assign(n * n, T(0.0));
    j.g_[index] = T(1.0);
    return j;
  }

  /// Jet with the given value and zero derivatives over n variables.
  static Jet2 zero_derivatives(const T& value, std::size_t n) {
    Jet2 j(value);
    j.g_.assign(n, T(0.0));
    j.h_.assign(n * n, T(0.0));
    return j;
  }

  const T& value() const { return v_; }
  std::size_t size() const { return g_.size(); }
  bool is_constant() const { return g_.empty(); }

  T grad(std::size_t i) const { return g_.empty() ? T(0.0) : g_[i]; }
  T hess(std::size_t i, std::size_t j) const {
    return g_.empty() ? T(0.0) : h_[i * g_.size() + j];
  }
  std::span<const T> gradient() const { return g_; }
  /// Row-major size() x size() Hessian.
  std::span<const T> hessian() const { return h_; }

  T& mutable_value() { return v_; }
  std::vector<T>& mutable_gradient() { return g_; }
  std::vector<T>& mutable_hessian() { return h_; }

  /// f(a) given f(v), f'(v), f''(v).
  static Jet2 apply_unary(const Jet2& a, T f0, const T& f1, const T& f2) {
    Jet2 r(std::move(f0));
    const std::size_t n = a.g_.size();
    if (n == 0) return r;
    r.g_.resize(n);
    r.h_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) r.g_[i] = f1 * a.g_[i];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        T hij = f1 * a.h_[i * n + j] + f2 * (a.g_[i] * a.g_[j]);
        r.h_[j * n + i] = hij;
        r.h_[i * n + j] = std::move(hij);
      }
    }
    return r;
  }

  Jet2& operator+=(const Jet2& b) { return *this = *this + b; }
  Jet2& operator-=(const Jet2& b) { return *this = *this - b; }
  Jet2& operator*=(const Jet2& b) { return *this = *this * b; }
  Jet2& operator/=(const Jet2& b) { return *this = *this / b; }

  friend Jet2 operator-(const Jet2& a) {
    Jet2 r(-a.v_);
    r.g_.reserve(a.g_.size());
    for (const auto& x : a.g_) r.g_.push_back(-x);
    r.h_.reserve(a.h_.size());
    for (const auto& x : a.h_) r.h_.push_back(-x);
    return r;
  }

  friend Jet2 operator+(const Jet2& a, const Jet2& b) {
    if (b.g_.empty()) {
      Jet2 r = a;
      r.v_ = a.v_ + b.v_;
      return r;
    }
    if (a.g_.empty()) {
      Jet2 r = b;
      r.v_ = a.v_ + b.v_;
      return r;
    }
    check_sizes(a, b);
    Jet2 r(a.v_ + b.v_);
    r.g_.resize(a.g_.size());
    r.h_.resize(a.h_.size());
    for (std::size_t i = 0; i < a.g_.size(); ++i) r.g_[i] = a.g_[i] + b.g_[i];
    for (std::size_t i = 0; i < a.h_.size(); ++i) r.h_[i] = a.h_[i] + b.h_[i];
    return r;
  }

  friend Jet2 operator-(const Jet2& a, const Jet2& b) {
    if (b.g_.empty()) {
      Jet2 r = a;
      r.v_ = a.v_ - b.v_;
      return r;
    }
    if (a.g_.empty()) {
      Jet2 r = -b;
      r.v_ = a.v_ - b.v_;
      return r;
    }
    check_sizes(a, b);
    Jet2 r(a.v_ - b.v_);
    r.g_.resize(a.g_.size());
    r.h_.resize(a.h_.size());
    for (std::size_t i = 0; i < a.g_.size(); ++i) r.g_[i] = a.g_[i] - b.g_[i];
    for (std::size_t i = 0; i < a.h_.size(); ++i) r.h_[i] = a.h_[i] - b.h_[i];
    return r;
  }

  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    if (b.g_.empty()) return scaled(a, b.v_);
    if (a.g_.empty()) return scaled(b, a.v_);
    check_sizes(a, b);
    const std::size_t n = a.g_.size();
    Jet2 r(a.v_ * b.v_);
    r.g_.resize(n);
    r.h_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) r.g_[i] = a.g_[i] * b.v_ + a.v_ * b.g_[i];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        T hij = a.h_[i * n + j] * b.v_ + a.v_ * b.h_[i * n + j] +
                (a.g_[i] * b.g_[j] + b.g_[i] * a.g_[j]);
        r.h_[j * n + i] = hij;
        r.h_[i * n + j] = std::move(hij);
      }
    }
    return r;
  }

  friend Jet2 operator/(const Jet2& a, const Jet2& b) {
    if (scalar_value(b.v_) == 0.0) throw DomainError("division by zero");
    if (b.g_.empty()) {
      Jet2 r(a.v_ / b.v_);
      r.g_.reserve(a.g_.size());
      for (const auto& x : a.g_) r.g_.push_back(x / b.v_);
      r.h_.reserve(a.h_.size());
      for (const auto& x : a.h_) r.h_.push_back(x / b.v_);
      return r;
    }
    // q = a/b:  q' = (a' - q b')/b,  q'' = (a'' - q b'' - b' q'^T - q' b'^T)/b
    const std::size_t n = b.g_.size();
    if (!a.g_.empty()) check_sizes(a, b);
    Jet2 r(a.v_ / b.v_);
    r.g_.resize(n);
    r.h_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) r.g_[i] = (a.grad(i) - r.v_ * b.g_[i]) / b.v_;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        T hij = (a.hess(i, j) - r.v_ * b.h_[i * n + j] -
                 (b.g_[i] * r.g_[j] + r.g_[i] * b.g_[j])) /
                b.v_;
        r.h_[j * n + i] = hij;
        r.h_[i * n + j] = std::move(hij);
      }
    }
    return r;
  }

  friend Jet2 operator+(const Jet2& a, double b) { return a + Jet2(b); }
  friend Jet2 operator+(double a, const Jet2& b) { return Jet2(a) + b; }
  friend Jet2 operator-(const Jet2& a, double b) { return a - Jet2(b); }
  friend Jet2 operator-(double a, const Jet2& b) { return Jet2(a) - b; }
  friend Jet2 operator*(const Jet2& a, double b) { return a * Jet2(b); }
  friend Jet2 operator*(double a, const Jet2& b) { return Jet2(a) * b; }
  friend Jet2 operator/(const Jet2& a, double b) { return a / Jet2(b); }
  friend Jet2 operator/(double a, const Jet2& b) { return Jet2(a) / b; }

 private:
  static void check_sizes(const Jet2& a, const Jet2& b) {
    if (a.g_.size() != b.g_.size()) {
      throw InvalidArgument("jets seeded over different variable sets");
    }
  }

  static Jet2 scaled(const Jet2& a, const T& c) {
    Jet2 r(a.v_ * c);
    r.g_.reserve(a.g_.size());
    for (const auto& x : a.g_) r.g_.push_back(x * c);
    r.h_.reserve(a.h_.size());
    for (const auto& x : a.h_) r.h_.push_back(x * c);
    return r;
  }

  T v_;
  std::vector<T> g_;
  std::vector<T> h_;
};

// Elementary functions. The double overloads live in std; these cover jets
// of any nesting depth by recursing on the value type.

template <typename T>
Jet2<T> sqrt(const Jet2<T>& a) {
  using std::sqrt;
  if (scalar_value(a) < 0.0) throw DomainError("sqrt of a negative number");
  T s = sqrt(a.value());
  T d1 = T(0.5) / s;
  T d2 = -d1 / (T(2.0) * a.value());
  return Jet2<T>::apply_unary(a, std::move(s), d1, d2);
}

template <typename T>
Jet2<T> sin(const Jet2<T>& a) {
  using std::cos;
  using std::sin;
  T s = sin(a.value());
  T c = cos(a.value());
  return Jet2<T>::apply_unary(a, s, c, -s);
}

template <typename T>
Jet2<T> cos(const Jet2<T>& a) {
  using std::cos;
  using std::sin;
  T s = sin(a.value());
  T c = cos(a.value());
  return Jet2<T>::apply_unary(a, c, -s, -c);
}

template <typename T>
Jet2<T> tan(const Jet2<T>& a) {
  using std::tan;
  T t = tan(a.value());
  T d1 = T(1.0) + t * t;
  T d2 = T(2.0) * t * d1;
  return Jet2<T>::apply_unary(a, t, d1, d2);
}

template <typename T>
Jet2<T> exp(const Jet2<T>& a) {
  using std::exp;
  T e = exp(a.value());
  return Jet2<T>::apply_unary(a, e, e, e);
}

template <typename T>
Jet2<T> log(const Jet2<T>& a) {
  using std::log;
  if (scalar_value(a) <= 0.0) throw DomainError("log of a non-positive number");
  T inv = T(1.0) / a.value();
  return Jet2<T>::apply_unary(a, log(a.value()), inv, -(inv * inv));
}

/// Non-smooth at zero; derivative taken as sign(v), second derivative 0.
template <typename T>
Jet2<T> abs(const Jet2<T>& a) {
  using std::abs;
  const double sgn = scalar_value(a) < 0.0 ? -1.0 : 1.0;
  return Jet2<T>::apply_unary(a, abs(a.value()), T(sgn), T(0.0));
}

/// a^b. A constant exponent uses the power rule (valid for negative bases
/// with integral exponents); otherwise exp(b log a).
template <typename T>
Jet2<T> pow(const Jet2<T>& a, const Jet2<T>& b) {
  using std::pow;
  if (b.is_constant()) {
    const T& c = b.value();
    T f0 = pow(a.value(), c);
    if (a.is_constant()) return Jet2<T>(f0);
    T d1 = c * pow(a.value(), c - T(1.0));
    T d2 = c * (c - T(1.0)) * pow(a.value(), c - T(2.0));
    return Jet2<T>::apply_unary(a, std::move(f0), d1, d2);
  }
  return exp(b * log(a));
}

template <typename T>
Jet2<T> pow(const Jet2<T>& a, double c) {
  return pow(a, Jet2<T>(T(c)));
}

/// Seeds the positions listed in `which` as independent variables (in the
/// order given); every other entry becomes a constant.
inline std::vector<Jet2<double>> seed(std::span<const double> values,
                                      std::span<const std::size_t> which) {
  std::set<std::size_t> seen;
  for (std::size_t k : which) {
    if (k >= values.size()) throw InvalidArgument("seed index out of range");
    if (!seen.insert(k).second) throw InvalidArgument("duplicate seed index");
  }
  std::vector<Jet2<double>> out;
  out.reserve(values.size());
  for (double v : values) out.emplace_back(v);
  for (std::size_t k = 0; k < which.size(); ++k) {
    out[which[k]] = Jet2<double>::variable(values[which[k]], which.size(), k);
  }
  return out;
}

/// Seeds every entry.
inline std::vector<Jet2<double>> seed_all(std::span<const double> values) {
  std::vector<Jet2<double>> out;
  out.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    out.push_back(Jet2<double>::variable(values[k], values.size(), k));
  }
  return out;
}

struct Derivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Gradient and Hessian of a jet over `n` seeded variables (a constant jet
/// yields zeros).
inline Derivatives derivatives_of(const Jet2<double>& j, std::size_t n) {
  Derivatives d;
  d.value = j.value();
  d.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  d.hessian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (j.is_constant()) return d;
  if (j.size() != n) throw InvalidArgument("jet size does not match seed count");
  for (std::size_t i = 0; i < n; ++i) {
    d.gradient(static_cast<Eigen::Index>(i)) = j.grad(i);
    for (std::size_t k = 0; k < n; ++k) {
      d.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j.hess(i, k);
    }
  }
  return d;
}

/// Evaluates f at x with derivatives restricted to the seeded positions.
template <typename F>
Derivatives eval_with_derivatives(F&& f, std::span<const double> x,
                                  std::span<const std::size_t> seeds) {
  const auto args = seed(x, seeds);
  const Jet2<double> r = f(std::span<const Jet2<double>>(args));
  return derivatives_of(r, seeds.size());
}

/// Chain rule for a function known only through its value, Jacobian and
/// Hessian with respect to raw arguments z (len D): returns the jet of
/// f(z(s)) given the argument jets z_k(s).
inline Jet2<double> chain(double value, std::span<const double> jac,
                          std::span<const double> hess,
                          std::span<const Jet2<double>> args) {
  const std::size_t d = args.size();
  std::size_t n = 0;
  for (const auto& a : args) n = std::max(n, a.size());
  if (n == 0) return Jet2<double>(value);
  Jet2<double> r = Jet2<double>::zero_derivatives(value, n);
  auto& g = r.mutable_gradient();
  auto& h = r.mutable_hessian();
  for (std::size_t k = 0; k < d; ++k) {
    if (args[k].is_constant() || jac[k] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) g[i] += jac[k] * args[k].grad(i);
    for (std::size_t i = 0; i < n * n; ++i) h[i] += jac[k] * args[k].hessian()[i];
  }
  for (std::size_t k = 0; k < d; ++k) {
    if (args[k].is_constant()) continue;
    for (std::size_t l = 0; l < d; ++l) {
      const double hkl = hess[k * d + l];
      if (args[l].is_constant() || hkl == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = hkl * args[k].grad(i);
        if (gi == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) h[i * n + j] += gi * args[l].grad(j);
      }
    }
  }
  // Symmetrize exactly; the two triangles accumulate in different orders.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (h[i * n + j] + h[j * n + i]);
      h[i * n + j] = s;
      h[j * n + i] = s;
    }
  }
  return r;
}

}  // namespace nonholo
