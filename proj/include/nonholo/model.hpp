#pragma once

// Chart-level data model.
//
// Two variable layouts are used throughout:
//   z = (x_leaf[m], x_trans[n], y_trans[n], t)             arguments of C, L_c
//   w = (x_leaf[m], x_trans[n], y_leaf[m], y_trans[n], t)  arguments of L, G
// The time slot is always present; time-independent fields ignore it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/errors.hpp"
#include "nonholo/scalar.hpp"

namespace nonholo {

using AD = Jet2<double>;
using ADSpan = std::span<const AD>;

struct ChartDims {
  std::size_t m = 1;
  std::size_t n = 1;

  void validate() const {
    if (m < 1 || n < 1) throw InvalidArgument("chart dimensions must satisfy m >= 1, n >= 1");
  }

  std::size_t z_size() const { return m + 2 * n + 1; }
  std::size_t w_size() const { return 2 * m + 2 * n + 1; }

  std::size_t z_xl(std::size_t u) const { return u; }
  std::size_t z_xt(std::size_t ub) const { return m + ub; }
  std::size_t z_yt(std::size_t ub) const { return m + n + ub; }
  std::size_t z_t() const { return m + 2 * n; }

  std::size_t w_xl(std::size_t u) const { return u; }
  std::size_t w_xt(std::size_t ub) const { return m + ub; }
  std::size_t w_yl(std::size_t u) const { return m + n + u; }
  std::size_t w_yt(std::size_t ub) const { return 2 * m + n + ub; }
  std::size_t w_t() const { return 2 * m + 2 * n; }

  friend bool operator==(const ChartDims&, const ChartDims&) = default;
};

struct TransState {
  Eigen::VectorXd x_leaf;
  Eigen::VectorXd x_trans;
  Eigen::VectorXd y_trans;
  std::optional<double> t;

  double time() const { return t.value_or(0.0); }

  void check(const ChartDims& d) const {
    if (static_cast<std::size_t>(x_leaf.size()) != d.m ||
        static_cast<std::size_t>(x_trans.size()) != d.n ||
        static_cast<std::size_t>(y_trans.size()) != d.n) {
      throw InvalidArgument("state lengths do not match chart dimensions");
    }
  }
};

/// A state together with a candidate transverse acceleration dy_trans/dt.
struct Jet {
  TransState state;
  Eigen::VectorXd a_trans;
};

inline std::vector<double> z_values(const ChartDims& d, const TransState& s) {
  s.check(d);
  std::vector<double> z(d.z_size());
  for (std::size_t u = 0; u < d.m; ++u) z[d.z_xl(u)] = s.x_leaf(static_cast<Eigen::Index>(u));
  for (std::size_t k = 0; k < d.n; ++k) {
    z[d.z_xt(k)] = s.x_trans(static_cast<Eigen::Index>(k));
    z[d.z_yt(k)] = s.y_trans(static_cast<Eigen::Index>(k));
  }
  z[d.z_t()] = s.time();
  return z;
}

inline std::vector<double> w_values(const ChartDims& d, const TransState& s, const Eigen::VectorXd& y_leaf) {
  s.check(d);
  std::vector<double> w(d.w_size());
  for (std::size_t u = 0; u < d.m; ++u) {
    w[d.w_xl(u)] = s.x_leaf(static_cast<Eigen::Index>(u));
    w[d.w_yl(u)] = y_leaf(static_cast<Eigen::Index>(u));
  }
  for (std::size_t k = 0; k < d.n; ++k) {
    w[d.w_xt(k)] = s.x_trans(static_cast<Eigen::Index>(k));
    w[d.w_yt(k)] = s.y_trans(static_cast<Eigen::Index>(k));
  }
  w[d.w_t()] = s.time();
  return w;
}

/// Assembles w-jets from z-jets and leaf-velocity jets.
inline std::vector<AD> w_from_z(const ChartDims& d, ADSpan z, ADSpan y_leaf) {
  std::vector<AD> w(d.w_size());
  for (std::size_t u = 0; u < d.m; ++u) {
    w[d.w_xl(u)] = z[d.z_xl(u)];
    w[d.w_yl(u)] = y_leaf[u];
  }
  for (std::size_t k = 0; k < d.n; ++k) {
    w[d.w_xt(k)] = z[d.z_xt(k)];
    w[d.w_yt(k)] = z[d.z_yt(k)];
  }
  w[d.w_t()] = z[d.z_t()];
  return w;
}

struct LagrangianField {
  ChartDims dims;
  std::function<AD(ADSpan w)> f;
  bool time_dependent = false;

  double operator()(const TransState& s, const Eigen::VectorXd& y_leaf) const {
    const auto w = w_values(dims, s, y_leaf);
    std::vector<AD> args(w.begin(), w.end());
    return f(args).value();
  }
};

enum class ConstraintKind { Nonlinear, Linear, Affine, ImplicitCon, ImplicitCov };

inline const char* kind_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Nonlinear: return "nonlinear";
    case ConstraintKind::Linear: return "linear";
    case ConstraintKind::Affine: return "affine";
    case ConstraintKind::ImplicitCon: return "implicit_con";
    case ConstraintKind::ImplicitCov: return "implicit_cov";
  }
  return "?";
}

struct ConstraintMap {
  ChartDims dims;
  ConstraintKind kind = ConstraintKind::Nonlinear;
  /// Leaf velocities C^u as jets over whatever the z-jets are seeded on.
  std::function<std::vector<AD>(ADSpan z)> eval;
  bool time_dependent = false;

  Eigen::VectorXd operator()(const TransState& s) const {
    const auto z = z_values(dims, s);
    std::vector<AD> args(z.begin(), z.end());
    const auto c = eval(args);
    Eigen::VectorXd out(static_cast<Eigen::Index>(dims.m));
    for (std::size_t u = 0; u < dims.m; ++u) out(static_cast<Eigen::Index>(u)) = c[u].value();
    return out;
  }
};

/// C with its z-Jacobian (m x D) and one D x D Hessian per leaf index.
struct ConstraintDerivs {
  Eigen::VectorXd value;
  Eigen::MatrixXd jac;
  std::vector<Eigen::MatrixXd> hess;
};

inline ConstraintDerivs constraint_derivatives(const ConstraintMap& c, const TransState& s) {
  const auto& d = c.dims;
  const auto z = z_values(d, s);
  const auto args = seed_all(z);
  const auto out = c.eval(args);
  if (out.size() != d.m) throw InvalidArgument("constraint returned the wrong number of components");
  ConstraintDerivs r;
  const auto D = static_cast<Eigen::Index>(d.z_size());
  r.value.resize(static_cast<Eigen::Index>(d.m));
  r.jac.resize(static_cast<Eigen::Index>(d.m), D);
  r.hess.reserve(d.m);
  for (std::size_t u = 0; u < d.m; ++u) {
    const auto dv = derivatives_of(out[u], d.z_size());
    r.value(static_cast<Eigen::Index>(u)) = dv.value;
    r.jac.row(static_cast<Eigen::Index>(u)) = dv.gradient.transpose();
    r.hess.push_back(dv.hessian);
  }
  return r;
}

/// Coefficient functions take jets over (x_leaf, x_trans).
using CoefficientFn = std::function<std::vector<AD>(ADSpan x)>;

namespace detail {

/// 2-norm condition number; infinite for singular or non-finite input.
inline double condition_number(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 1.0;
  if (!a.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

inline std::vector<AD> x_part(const ChartDims& d, ADSpan z) {
  std::vector<AD> x(d.m + d.n);
  for (std::size_t i = 0; i < d.m + d.n; ++i) x[i] = z[i];
  return x;
}

inline std::vector<AD> apply_coefficients(const ChartDims& d, const CoefficientFn& coeffs, ADSpan z,
                                          const std::vector<AD>& x) {
  const auto a = coeffs(x);
  if (a.size() != d.m * d.n) throw InvalidArgument("coefficient function must return m*n entries");
  std::vector<AD> c(d.m, AD(0.0));
  for (std::size_t u = 0; u < d.m; ++u) {
    for (std::size_t k = 0; k < d.n; ++k) c[u] += a[u * d.n + k] * z[d.z_yt(k)];
  }
  return c;
}

}  // namespace detail

/// C^u = sum_k C^u_k(x) y^k. `coeffs` returns the m x n matrix row-major.
inline ConstraintMap lift_linear(const ChartDims& d, CoefficientFn coeffs) {
  d.validate();
  ConstraintMap c;
  c.dims = d;
  c.kind = ConstraintKind::Linear;
  c.eval = [d, coeffs = std::move(coeffs)](ADSpan z) {
    return detail::apply_coefficients(d, coeffs, z, detail::x_part(d, z));
  };
  return c;
}

/// C^u = sum_k C^u_k(x) y^k + b^u(x).
inline ConstraintMap lift_affine(const ChartDims& d, CoefficientFn coeffs, CoefficientFn offset) {
  d.validate();
  ConstraintMap c;
  c.dims = d;
  c.kind = ConstraintKind::Affine;
  c.eval = [d, coeffs = std::move(coeffs), offset = std::move(offset)](ADSpan z) {
    const auto x = detail::x_part(d, z);
    auto out = detail::apply_coefficients(d, coeffs, z, x);
    const auto b = offset(x);
    if (b.size() != d.m) throw InvalidArgument("offset function must return m entries");
    for (std::size_t u = 0; u < d.m; ++u) out[u] += b[u];
    return out;
  };
  return c;
}

/// Full chart velocity (C(s), y_trans).
inline Eigen::VectorXd constraint_velocity(const ConstraintMap& c, const TransState& s) {
  const auto& d = c.dims;
  Eigen::VectorXd v(static_cast<Eigen::Index>(d.m + d.n));
  v.head(static_cast<Eigen::Index>(d.m)) = c(s);
  v.tail(static_cast<Eigen::Index>(d.n)) = s.y_trans;
  return v;
}

/// A scalar function on the transverse phase space (of z).
struct ScalarField {
  ChartDims dims;
  std::function<AD(ADSpan z)> f;
  bool time_dependent = false;

  double operator()(const TransState& s) const {
    const auto z = z_values(dims, s);
    std::vector<AD> args(z.begin(), z.end());
    return f(args).value();
  }
};

inline void check_compatible(const LagrangianField& L, const ConstraintMap& C) {
  if (!(L.dims == C.dims)) throw InvalidArgument("Lagrangian and constraint use different chart dimensions");
}

/// L_c(z) = L(x, C(z), y_trans, t).
inline ScalarField constrained_lagrangian(const LagrangianField& L, const ConstraintMap& C) {
  check_compatible(L, C);
  ScalarField r;
  r.dims = C.dims;
  r.time_dependent = L.time_dependent || C.time_dependent;
  r.f = [L, C](ADSpan z) {
    const auto y_leaf = C.eval(z);
    const auto w = w_from_z(C.dims, z, y_leaf);
    return L.f(w);
  };
  return r;
}

struct LegendreCovector {
  Eigen::VectorXd p_leaf;
  Eigen::VectorXd p_trans;
};

inline LegendreCovector legendre(const LagrangianField& L, const ConstraintMap& C, const TransState& s) {
  check_compatible(L, C);
  const auto& d = C.dims;
  const auto w = w_values(d, s, C(s));
  std::vector<std::size_t> slots;
  for (std::size_t u = 0; u < d.m; ++u) slots.push_back(d.w_yl(u));
  for (std::size_t k = 0; k < d.n; ++k) slots.push_back(d.w_yt(k));
  const auto args = seed(w, slots);
  const AD v = L.f(args);
  LegendreCovector p;
  p.p_leaf.resize(static_cast<Eigen::Index>(d.m));
  p.p_trans.resize(static_cast<Eigen::Index>(d.n));
  for (std::size_t u = 0; u < d.m; ++u) p.p_leaf(static_cast<Eigen::Index>(u)) = v.grad(u);
  for (std::size_t k = 0; k < d.n; ++k) p.p_trans(static_cast<Eigen::Index>(k)) = v.grad(d.m + k);
  return p;
}

struct KindReport {
  bool passed = true;
  std::size_t samples_tested = 0;
  std::vector<std::string> violations;
};

/// Randomized check that a map declared Linear/Affine really is. Points
/// where the constraint is undefined are skipped.
inline KindReport validate_kind(const ConstraintMap& c, std::size_t samples, std::uint64_t seed_value = 20240611,
                                double tol = 1e-9) {
  if (samples < 1) throw InvalidArgument("validate_kind needs at least one sample");
  KindReport rep;
  if (c.kind != ConstraintKind::Linear && c.kind != ConstraintKind::Affine) return rep;
  const auto& d = c.dims;
  std::mt19937_64 rng(seed_value);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto random_vec = [&](std::size_t k) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = U(rng);
    return v;
  };
  auto close = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double scale = std::max({1.0, a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>()});
    return (a - b).lpNorm<Eigen::Infinity>() <= tol * scale;
  };
  const bool affine = c.kind == ConstraintKind::Affine;
  for (std::size_t k = 0; k < samples; ++k) {
    TransState s{random_vec(d.m), random_vec(d.n), random_vec(d.n), std::nullopt};
    const Eigen::VectorXd y1 = random_vec(d.n);
    const Eigen::VectorXd y2 = random_vec(d.n);
    try {
      auto at = [&](const Eigen::VectorXd& y) {
        TransState q = s;
        q.y_trans = y;
        return c(q);
      };
      const Eigen::VectorXd b = at(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.n)));
      auto lin = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return at(y) - b; };
      ++rep.samples_tested;
      if (!affine && !close(b, Eigen::VectorXd::Zero(b.size()))) {
        rep.violations.push_back("C(x, 0) != 0 at sample " + std::to_string(k));
      }
      for (double lambda : {2.0, -1.0, 0.5}) {
        if (!close(lin(lambda * y1), lambda * lin(y1))) {
          rep.violations.push_back("not homogeneous (lambda=" + format_double(lambda) + ") at sample " +
                                   std::to_string(k));
          break;
        }
      }
      if (!close(lin(y1 + y2), lin(y1) + lin(y2))) {
        rep.violations.push_back("not additive at sample " + std::to_string(k));
      }
    } catch (const DomainError&) {
      continue;
    }
  }
  rep.passed = rep.violations.empty();
  return rep;
}

}  // namespace nonholo
