#pragma once

// Constraints given implicitly as G(x, y_leaf, y_trans[, t]) = 0 with m
// components, solved for the leaf velocities by Newton's method. The same
// machinery serves contravariant (con) and covariant (cov) constraints; the
// distinction only changes how the components are read.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/errors.hpp"
#include "nonholo/model.hpp"
#include "nonholo/scalar.hpp"

namespace nonholo {

enum class ImplicitKind { Con, Cov };

struct ImplicitConstraint {
  ChartDims dims;
  ImplicitKind kind = ImplicitKind::Con;
  /// G over w = (x_leaf, x_trans, y_leaf, y_trans, t); m components.
  std::function<std::vector<AD>(ADSpan w)> G;
  /// Newton starting guess from z values.
  std::function<Eigen::VectorXd(const std::vector<double>& z)> branch_hint;
  bool time_dependent = false;
  double tol = 1e-12;
  int max_iter = 50;
  double cond_limit = 1e12;
};

struct ImplicitSolution {
  Eigen::VectorXd y_leaf;
  int iterations = 0;
  double residual = 0.0;
  double cond = 0.0;
};

namespace detail {

// G value and Jacobian with respect to y_leaf only.
inline void g_and_leaf_jacobian(const ImplicitConstraint& ic, std::vector<double> w, Eigen::VectorXd& g,
                                Eigen::MatrixXd& jac) {
  const auto& d = ic.dims;
  std::vector<std::size_t> slots(d.m);
  for (std::size_t u = 0; u < d.m; ++u) slots[u] = d.w_yl(u);
  const auto args = seed(w, slots);
  const auto out = ic.G(args);
  if (out.size() != d.m) throw InvalidArgument("implicit constraint must have m components");
  const auto m = static_cast<Eigen::Index>(d.m);
  g.resize(m);
  jac.setZero(m, m);
  for (std::size_t i = 0; i < d.m; ++i) {
    g(static_cast<Eigen::Index>(i)) = out[i].value();
    if (out[i].is_constant()) continue;
    for (std::size_t u = 0; u < d.m; ++u) jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(u)) = out[i].grad(u);
  }
}

}  // namespace detail

/// Newton solve for y_leaf at the given z values.
inline ImplicitSolution solve(const ImplicitConstraint& ic, const std::vector<double>& z) {
  const auto& d = ic.dims;
  if (z.size() != d.z_size()) throw InvalidArgument("z has the wrong length");
  Eigen::VectorXd y = ic.branch_hint(z);
  if (static_cast<std::size_t>(y.size()) != d.m) throw InvalidArgument("branch hint must return m values");

  std::vector<double> w(d.w_size());
  auto load = [&](const Eigen::VectorXd& yl) {
    for (std::size_t u = 0; u < d.m; ++u) {
      w[d.w_xl(u)] = z[d.z_xl(u)];
      w[d.w_yl(u)] = yl(static_cast<Eigen::Index>(u));
    }
    for (std::size_t k = 0; k < d.n; ++k) {
      w[d.w_xt(k)] = z[d.z_xt(k)];
      w[d.w_yt(k)] = z[d.z_yt(k)];
    }
    w[d.w_t()] = z[d.z_t()];
  };

  Eigen::VectorXd g;
  Eigen::MatrixXd jac;
  for (int it = 0;; ++it) {
    load(y);
    detail::g_and_leaf_jacobian(ic, w, g, jac);
    const double cond = detail::condition_number(jac);
    if (!g.allFinite()) throw NoConvergence("implicit constraint evaluated to a non-finite value");
    // Scale-aware stopping test: roundoff in G grows with |J||y|.
    const double scale = std::max(1.0, jac.lpNorm<Eigen::Infinity>() * y.lpNorm<Eigen::Infinity>());
    const double res = g.lpNorm<Eigen::Infinity>();
    if (res <= ic.tol * scale) {
      if (!(cond <= ic.cond_limit)) {
        throw SingularJacobian("leaf-velocity Jacobian of the implicit constraint is singular at the root (cond=" +
                                   format_double(cond) + ")",
                               cond);
      }
      // One polishing step: near the root Newton is quadratic, so this
      // brings y to roundoff without risking the stopping test.
      if (res > 0.0) {
        const Eigen::VectorXd y2 = y - jac.partialPivLu().solve(g);
        if (y2.allFinite()) return ImplicitSolution{y2, it + 1, res, cond};
      }
      return ImplicitSolution{y, it, res, cond};
    }
    if (it >= ic.max_iter) {
      throw NoConvergence("Newton did not converge in " + std::to_string(ic.max_iter) + " iterations (|G|=" +
                          format_double(res) + ")");
    }
    if (!(cond <= ic.cond_limit)) {
      throw SingularJacobian("leaf-velocity Jacobian of the implicit constraint is singular (cond=" +
                                 format_double(cond) + ")",
                             cond);
    }
    y -= jac.partialPivLu().solve(g);
  }
}

inline ImplicitSolution solve(const ImplicitConstraint& ic, const TransState& s) {
  return solve(ic, z_values(ic.dims, s));
}

/// Implicitly defined C. Derivatives come from the implicit function
/// theorem applied to the AD derivatives of G at the solved root:
///   y_z = -G_y^{-1} G_z,   y_zz = -G_y^{-1} (T^T G_ww T),  T = [I; y_z].
inline ConstraintMap as_constraint_map(const ImplicitConstraint& ic) {
  ConstraintMap c;
  c.dims = ic.dims;
  c.kind = ic.kind == ImplicitKind::Con ? ConstraintKind::ImplicitCon : ConstraintKind::ImplicitCov;
  c.time_dependent = ic.time_dependent;
  c.eval = [ic](ADSpan zj) {
    const auto& d = ic.dims;
    const std::size_t D = d.z_size();
    const std::size_t W = d.w_size();
    std::vector<double> z(D);
    bool any_seeded = false;
    for (std::size_t k = 0; k < D; ++k) {
      z[k] = zj[k].value();
      any_seeded = any_seeded || !zj[k].is_constant();
    }
    const auto sol = solve(ic, z);
    std::vector<AD> out;
    out.reserve(d.m);
    if (!any_seeded) {
      for (std::size_t u = 0; u < d.m; ++u) out.emplace_back(sol.y_leaf(static_cast<Eigen::Index>(u)));
      return out;
    }

    // w index of each z slot.
    std::vector<std::size_t> w_of_z(D);
    for (std::size_t u = 0; u < d.m; ++u) w_of_z[d.z_xl(u)] = d.w_xl(u);
    for (std::size_t k = 0; k < d.n; ++k) {
      w_of_z[d.z_xt(k)] = d.w_xt(k);
      w_of_z[d.z_yt(k)] = d.w_yt(k);
    }
    w_of_z[d.z_t()] = d.w_t();

    std::vector<double> w(W);
    for (std::size_t k = 0; k < D; ++k) w[w_of_z[k]] = z[k];
    for (std::size_t u = 0; u < d.m; ++u) w[d.w_yl(u)] = sol.y_leaf(static_cast<Eigen::Index>(u));
    const auto gj = ic.G(seed_all(w));

    const auto m = static_cast<Eigen::Index>(d.m);
    const auto Dz = static_cast<Eigen::Index>(D);
    Eigen::MatrixXd Gy(m, m), Gz(m, Dz);
    std::vector<Eigen::MatrixXd> H(d.m);
    for (std::size_t i = 0; i < d.m; ++i) {
      const auto der = derivatives_of(gj[i], W);
      for (std::size_t u = 0; u < d.m; ++u) Gy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(u)) = der.gradient(static_cast<Eigen::Index>(d.w_yl(u)));
      for (std::size_t k = 0; k < D; ++k) Gz(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = der.gradient(static_cast<Eigen::Index>(w_of_z[k]));
      H[i] = der.hessian;
    }
    const double cond = detail::condition_number(Gy);
    if (!(cond <= ic.cond_limit)) {
      throw SingularJacobian("leaf-velocity Jacobian of the implicit constraint is singular (cond=" +
                                 format_double(cond) + ")",
                             cond);
    }
    const auto lu = Gy.partialPivLu();
    const Eigen::MatrixXd yz = -lu.solve(Gz);

    // T maps z-directions to w-directions.
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(W), Dz);
    for (std::size_t k = 0; k < D; ++k) T(static_cast<Eigen::Index>(w_of_z[k]), static_cast<Eigen::Index>(k)) = 1.0;
    for (std::size_t u = 0; u < d.m; ++u) T.row(static_cast<Eigen::Index>(d.w_yl(u))) = yz.row(static_cast<Eigen::Index>(u));

    std::vector<Eigen::MatrixXd> Q(d.m);
    for (std::size_t i = 0; i < d.m; ++i) Q[i] = T.transpose() * H[i] * T;
    const Eigen::MatrixXd Gy_inv = lu.inverse();

    for (std::size_t u = 0; u < d.m; ++u) {
      Eigen::MatrixXd yzz = Eigen::MatrixXd::Zero(Dz, Dz);
      for (std::size_t i = 0; i < d.m; ++i) yzz -= Gy_inv(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(i)) * Q[i];
      std::vector<double> jac(D), hess(D * D);
      for (std::size_t k = 0; k < D; ++k) {
        jac[k] = yz(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(k));
        for (std::size_t l = 0; l < D; ++l) hess[k * D + l] = yzz(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      }
      out.push_back(chain(sol.y_leaf(static_cast<Eigen::Index>(u)), jac, hess, zj));
    }
    return out;
  };
  return c;
}

/// Velocity gradients of G at the solved point: dG/dy_leaf (m x m) and
/// dG/dy_trans (m x n).
struct ConstraintGradients {
  Eigen::VectorXd y_leaf;
  Eigen::MatrixXd dG_dyleaf;
  Eigen::MatrixXd dG_dytrans;
};

inline ConstraintGradients constraint_gradients(const ImplicitConstraint& ic, const TransState& s) {
  const auto& d = ic.dims;
  const auto sol = solve(ic, s);
  const auto w = w_values(d, s, sol.y_leaf);
  std::vector<std::size_t> slots;
  for (std::size_t u = 0; u < d.m; ++u) slots.push_back(d.w_yl(u));
  for (std::size_t k = 0; k < d.n; ++k) slots.push_back(d.w_yt(k));
  const auto out = ic.G(seed(w, slots));
  ConstraintGradients r;
  r.y_leaf = sol.y_leaf;
  const auto m = static_cast<Eigen::Index>(d.m);
  const auto n = static_cast<Eigen::Index>(d.n);
  r.dG_dyleaf.setZero(m, m);
  r.dG_dytrans.setZero(m, n);
  for (std::size_t i = 0; i < d.m; ++i) {
    if (out[i].is_constant()) continue;
    for (std::size_t u = 0; u < d.m; ++u) r.dG_dyleaf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(u)) = out[i].grad(u);
    for (std::size_t k = 0; k < d.n; ++k) r.dG_dytrans(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = out[i].grad(d.m + k);
  }
  return r;
}

/// E_trans + (dC/dy_trans)^T E_leaf.
inline Eigen::VectorXd chetaev_residual(const ConstraintMap& c, const Eigen::VectorXd& E_leaf,
                                        const Eigen::VectorXd& E_trans, const TransState& s) {
  const auto& d = c.dims;
  if (static_cast<std::size_t>(E_leaf.size()) != d.m || static_cast<std::size_t>(E_trans.size()) != d.n) {
    throw InvalidArgument("covector lengths do not match chart dimensions");
  }
  const auto z = z_values(d, s);
  std::vector<std::size_t> slots(d.n);
  for (std::size_t k = 0; k < d.n; ++k) slots[k] = d.z_yt(k);
  const auto out = c.eval(seed(z, slots));
  Eigen::VectorXd r = E_trans;
  for (std::size_t u = 0; u < d.m; ++u) {
    if (out[u].is_constant()) continue;
    for (std::size_t k = 0; k < d.n; ++k) r(static_cast<Eigen::Index>(k)) += out[u].grad(k) * E_leaf(static_cast<Eigen::Index>(u));
  }
  return r;
}

}  // namespace nonholo
