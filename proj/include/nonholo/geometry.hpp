#pragma once

// Curvature-type tensors of a constraint at a state.
//
// Index conventions: three-index tensors are stored as m matrices of size
// n x n (T[u](a, b)); two-index tensors as m x n matrices (T(u, a)).
// The pseudo-curvature K is the coordinate expansion
//   K^u_a = C^v d2C^u/dx^v dy^a + y^b d2C^u/dx^b dy^a - dC^u/dx^a - C^v_a dC^u/dx^v
// and the S-curvature is R = K + S^b Ctensor^u_ab.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/errors.hpp"
#include "nonholo/expr.hpp"
#include "nonholo/model.hpp"
#include "nonholo/scalar.hpp"

namespace nonholo {

using Tensor3 = std::vector<Eigen::MatrixXd>;

namespace detail {

inline Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

inline void require_linear_or_affine(const ConstraintMap& c) {
  if (c.kind != ConstraintKind::Linear && c.kind != ConstraintKind::Affine) {
    throw WrongKind(std::string("operation requires a linear or affine constraint, got ") + kind_name(c.kind));
  }
}

// Derivatives of C at (x, y_trans = 0): value is b(x), y-gradient the
// coefficients C^u_a(x), and the cross Hessian their x-derivatives.
inline ConstraintDerivs derivs_at_zero_velocity(const ConstraintMap& c, TransState s) {
  s.y_trans.setZero();
  return constraint_derivatives(c, s);
}

inline Tensor3 curvature_from(const ChartDims& d, const ConstraintDerivs& cd) {
  Tensor3 B(d.m, Eigen::MatrixXd::Zero(ix(d.n), ix(d.n)));
  for (std::size_t u = 0; u < d.m; ++u) {
    const auto& H = cd.hess[u];
    // X(a,b) = dC^u_a/dx^b,  Y(a,b) = C^v_b dC^u_a/dx^v
    Eigen::MatrixXd X(ix(d.n), ix(d.n)), Y = Eigen::MatrixXd::Zero(ix(d.n), ix(d.n));
    for (std::size_t a = 0; a < d.n; ++a) {
      for (std::size_t b = 0; b < d.n; ++b) {
        X(ix(a), ix(b)) = H(ix(d.z_yt(a)), ix(d.z_xt(b)));
        for (std::size_t v = 0; v < d.m; ++v) {
          Y(ix(a), ix(b)) += cd.jac(ix(v), ix(d.z_yt(b))) * H(ix(d.z_yt(a)), ix(d.z_xl(v)));
        }
      }
    }
    for (std::size_t a = 0; a < d.n; ++a) {
      for (std::size_t b = 0; b < d.n; ++b) {
        B[u](ix(a), ix(b)) = (X(ix(a), ix(b)) - X(ix(b), ix(a))) + (Y(ix(a), ix(b)) - Y(ix(b), ix(a)));
      }
    }
  }
  return B;
}

}  // namespace detail

/// B^u_ab = dC^u_a/dx^b - dC^u_b/dx^a + C^v_b dC^u_a/dx^v - C^v_a dC^u_b/dx^v.
/// Antisymmetric in (a, b) exactly.
inline Tensor3 curvature_B(const ConstraintMap& c, const TransState& s) {
  detail::require_linear_or_affine(c);
  return detail::curvature_from(c.dims, detail::derivs_at_zero_velocity(c, s));
}

/// gamma^u_a = b^v dC^u_a/dx^v - db^u/dx^a - C^v_a db^u/dx^v, the sign for
/// which K = y.B + gamma.
inline Eigen::MatrixXd gamma_affine(const ConstraintMap& c, const TransState& s) {
  if (c.kind != ConstraintKind::Affine) {
    throw WrongKind(std::string("gamma requires an affine constraint, got ") + kind_name(c.kind));
  }
  const auto& d = c.dims;
  const auto cd = detail::derivs_at_zero_velocity(c, s);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(detail::ix(d.m), detail::ix(d.n));
  using detail::ix;
  for (std::size_t u = 0; u < d.m; ++u) {
    for (std::size_t a = 0; a < d.n; ++a) {
      double acc = -cd.jac(ix(u), ix(d.z_xt(a)));
      for (std::size_t v = 0; v < d.m; ++v) {
        acc += cd.value(ix(v)) * cd.hess[u](ix(d.z_yt(a)), ix(d.z_xl(v)));
        acc -= cd.jac(ix(v), ix(d.z_yt(a))) * cd.jac(ix(u), ix(d.z_xl(v)));
      }
      g(ix(u), ix(a)) = acc;
    }
  }
  return g;
}

inline Tensor3 nonlinearity_tensor(const ChartDims& d, const ConstraintDerivs& cd) {
  using detail::ix;
  Tensor3 T(d.m, Eigen::MatrixXd::Zero(ix(d.n), ix(d.n)));
  for (std::size_t u = 0; u < d.m; ++u) {
    for (std::size_t a = 0; a < d.n; ++a) {
      for (std::size_t b = 0; b < d.n; ++b) T[u](ix(a), ix(b)) = cd.hess[u](ix(d.z_yt(a)), ix(d.z_yt(b)));
    }
  }
  return T;
}

/// d2C^u/dy^a dy^b at s.
inline Tensor3 nonlinearity_tensor(const ConstraintMap& c, const TransState& s) {
  return nonlinearity_tensor(c.dims, constraint_derivatives(c, s));
}

inline Eigen::MatrixXd pseudo_curvature_K(const ChartDims& d, const ConstraintDerivs& cd, const TransState& s) {
  using detail::ix;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ix(d.m), ix(d.n));
  for (std::size_t u = 0; u < d.m; ++u) {
    const auto& H = cd.hess[u];
    for (std::size_t a = 0; a < d.n; ++a) {
      double acc = -cd.jac(ix(u), ix(d.z_xt(a)));
      for (std::size_t v = 0; v < d.m; ++v) {
        acc += cd.value(ix(v)) * H(ix(d.z_xl(v)), ix(d.z_yt(a)));
        acc -= cd.jac(ix(v), ix(d.z_yt(a))) * cd.jac(ix(u), ix(d.z_xl(v)));
      }
      for (std::size_t b = 0; b < d.n; ++b) acc += s.y_trans(ix(b)) * H(ix(d.z_xt(b)), ix(d.z_yt(a)));
      K(ix(u), ix(a)) = acc;
    }
  }
  return K;
}

inline Eigen::MatrixXd pseudo_curvature_K(const ConstraintMap& c, const TransState& s) {
  return pseudo_curvature_K(c.dims, constraint_derivatives(c, s), s);
}

inline Eigen::MatrixXd s_curvature(const ChartDims& d, const Eigen::MatrixXd& K, const Tensor3& Ct,
                                   const Eigen::VectorXd& S) {
  using detail::ix;
  if (static_cast<std::size_t>(S.size()) != d.n) throw InvalidArgument("semispray must have n components");
  Eigen::MatrixXd R = K;
  for (std::size_t u = 0; u < d.m; ++u) R.row(ix(u)) += (Ct[u] * S).transpose();
  return R;
}

/// R^u_a = K^u_a + S^b Ctensor^u_ab.
inline Eigen::MatrixXd s_curvature(const ConstraintMap& c, const Eigen::VectorXd& S, const TransState& s) {
  const auto cd = constraint_derivatives(c, s);
  return s_curvature(c.dims, pseudo_curvature_K(c.dims, cd, s), nonlinearity_tensor(c.dims, cd), S);
}

struct GeometryPack {
  std::optional<Tensor3> B;
  std::optional<Eigen::MatrixXd> gamma;
  Tensor3 Ctensor;
  Eigen::MatrixXd K;
  Eigen::MatrixXd R;
};

inline GeometryPack geometry_pack(const ConstraintMap& c, const Eigen::VectorXd& S, const TransState& s) {
  GeometryPack g;
  const auto cd = constraint_derivatives(c, s);
  g.Ctensor = nonlinearity_tensor(c.dims, cd);
  g.K = pseudo_curvature_K(c.dims, cd, s);
  g.R = s_curvature(c.dims, g.K, g.Ctensor, S);
  if (c.kind == ConstraintKind::Linear || c.kind == ConstraintKind::Affine) g.B = curvature_B(c, s);
  if (c.kind == ConstraintKind::Affine) g.gamma = gamma_affine(c, s);
  return g;
}

// ---------------------------------------------------------------------------
// Chart changes adapted to the leaf/transverse split:
//   x_leaf' = A(x_leaf, x_trans),  x_trans' = B(x_trans).
// Forward and inverse maps are expressions in the usual variable names; the
// inverse expressions read the primed coordinates under the same names.

struct AdaptedDiffeo {
  std::vector<expr::Expr> leaf;
  std::vector<expr::Expr> trans;
  std::vector<expr::Expr> leaf_inverse;
  std::vector<expr::Expr> trans_inverse;
  std::map<std::string, double> params;
};

namespace detail {

template <typename S>
std::map<std::string, S> coordinate_env(const ChartDims& d, const std::vector<S>& xl, const std::vector<S>& xt,
                                        const std::map<std::string, double>& params) {
  std::map<std::string, S> env;
  for (const auto& [k, v] : params) env.emplace(k, S(v));
  for (std::size_t u = 0; u < d.m; ++u) env.insert_or_assign("x" + std::to_string(u + 1), xl[u]);
  for (std::size_t a = 0; a < d.n; ++a) env.insert_or_assign("xb" + std::to_string(a + 1), xt[a]);
  return env;
}

template <typename S>
std::vector<S> eval_all(const std::vector<expr::Expr>& es, const std::map<std::string, S>& env) {
  std::vector<S> out;
  out.reserve(es.size());
  for (const auto& e : es) out.push_back(e.eval(env));
  return out;
}

// Jacobian of the map `es` at jet-valued points, as jets: entry (i, k) is
// d es_i / d var_k with vars = (xl, xt) restricted by `use_leaf`.
inline std::vector<std::vector<AD>> jacobian_jets(const ChartDims& d, const std::vector<expr::Expr>& es,
                                                  const std::vector<AD>& xl, const std::vector<AD>& xt,
                                                  const std::map<std::string, double>& params, bool use_leaf) {
  using N = Jet2<AD>;
  const std::size_t nv = (use_leaf ? d.m : 0) + d.n;
  std::vector<N> nl(d.m), nt(d.n);
  std::size_t k = 0;
  for (std::size_t u = 0; u < d.m; ++u) nl[u] = use_leaf ? N::variable(xl[u], nv, k++) : N(xl[u]);
  for (std::size_t a = 0; a < d.n; ++a) nt[a] = N::variable(xt[a], nv, k++);
  const auto out = eval_all(es, coordinate_env<N>(d, nl, nt, params));
  std::vector<std::vector<AD>> J(out.size(), std::vector<AD>(nv, AD(0.0)));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].is_constant()) continue;
    for (std::size_t v = 0; v < nv; ++v) J[i][v] = out[i].grad(v);
  }
  return J;
}

// Solves M x = r for small jet-valued systems (Gaussian elimination with
// partial pivoting on the values).
inline std::vector<AD> solve_small(std::vector<std::vector<AD>> M, std::vector<AD> r) {
  const std::size_t n = r.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i) {
      if (std::abs(M[i][col].value()) > std::abs(M[piv][col].value())) piv = i;
    }
    if (M[piv][col].value() == 0.0) throw ChartError("chart Jacobian is not invertible");
    std::swap(M[piv], M[col]);
    std::swap(r[piv], r[col]);
    for (std::size_t i = col + 1; i < n; ++i) {
      const AD f = M[i][col] / M[col][col];
      for (std::size_t j = col; j < n; ++j) M[i][j] -= f * M[col][j];
      r[i] -= f * r[col];
    }
  }
  std::vector<AD> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    AD acc = r[ii];
    for (std::size_t j = ii + 1; j < n; ++j) acc -= M[ii][j] * x[j];
    x[ii] = acc / M[ii][ii];
  }
  return x;
}

}  // namespace detail

/// The constraint expressed in the primed chart:
///   C'(x', y') = A_x C(x, y) + A_xb y,   y = B_xb^{-1} y'.
inline ConstraintMap transform_constraint(const ConstraintMap& c, const AdaptedDiffeo& f) {
  const auto d = c.dims;
  if (f.leaf.size() != d.m || f.leaf_inverse.size() != d.m || f.trans.size() != d.n ||
      f.trans_inverse.size() != d.n) {
    throw ChartError("diffeomorphism component counts do not match chart dimensions");
  }
  ConstraintMap out;
  out.dims = d;
  out.kind = c.kind;
  out.time_dependent = c.time_dependent;
  out.eval = [c, f, d](ADSpan zp) {
    std::vector<AD> xlp(d.m), xtp(d.n), ytp(d.n);
    for (std::size_t u = 0; u < d.m; ++u) xlp[u] = zp[d.z_xl(u)];
    for (std::size_t a = 0; a < d.n; ++a) {
      xtp[a] = zp[d.z_xt(a)];
      ytp[a] = zp[d.z_yt(a)];
    }
    const auto env_p = detail::coordinate_env<AD>(d, xlp, xtp, f.params);
    const auto xt = detail::eval_all(f.trans_inverse, env_p);
    const auto xl = detail::eval_all(f.leaf_inverse, env_p);

    const auto Bj = detail::jacobian_jets(d, f.trans, xl, xt, f.params, false);
    const auto yt = detail::solve_small(Bj, ytp);

    std::vector<AD> z(d.z_size());
    for (std::size_t u = 0; u < d.m; ++u) z[d.z_xl(u)] = xl[u];
    for (std::size_t a = 0; a < d.n; ++a) {
      z[d.z_xt(a)] = xt[a];
      z[d.z_yt(a)] = yt[a];
    }
    z[d.z_t()] = zp[d.z_t()];
    const auto cv = c.eval(z);

    const auto Aj = detail::jacobian_jets(d, f.leaf, xl, xt, f.params, true);
    std::vector<AD> res(d.m, AD(0.0));
    for (std::size_t u = 0; u < d.m; ++u) {
      for (std::size_t v = 0; v < d.m; ++v) res[u] += Aj[u][v] * cv[v];
      for (std::size_t a = 0; a < d.n; ++a) res[u] += Aj[u][d.m + a] * yt[a];
    }
    return res;
  };
  return out;
}

struct ChartTransformReport {
  TransState new_state;
  Eigen::VectorXd new_semispray;
  Eigen::MatrixXd R_new;
  Eigen::MatrixXd R_expected;
  Eigen::MatrixXd K_new;
  Eigen::MatrixXd K_expected;
  double R_deviation = 0.0;
  double K_deviation = 0.0;
};

/// Transforms C and the semispray S to the primed chart, recomputes K and R
/// there, and compares with the tensorial rule T' = A_x T B_xb^{-1}.
inline ChartTransformReport chart_transform_check(const ConstraintMap& c, const AdaptedDiffeo& f,
                                                  const Eigen::VectorXd& S, const TransState& s) {
  using detail::ix;
  const auto& d = c.dims;
  s.check(d);
  if (static_cast<std::size_t>(S.size()) != d.n) throw InvalidArgument("semispray must have n components");

  // Jacobians and the second derivatives of B at s.
  std::vector<double> xv(d.m + d.n);
  for (std::size_t u = 0; u < d.m; ++u) xv[u] = s.x_leaf(ix(u));
  for (std::size_t a = 0; a < d.n; ++a) xv[d.m + a] = s.x_trans(ix(a));
  const auto xj = seed_all(xv);
  std::vector<AD> xl(xj.begin(), xj.begin() + static_cast<std::ptrdiff_t>(d.m));
  std::vector<AD> xt(xj.begin() + static_cast<std::ptrdiff_t>(d.m), xj.end());
  const auto env = detail::coordinate_env<AD>(d, xl, xt, f.params);
  const auto Av = detail::eval_all(f.leaf, env);
  const auto Bv = detail::eval_all(f.trans, env);

  Eigen::MatrixXd Ax(ix(d.m), ix(d.m)), Axb(ix(d.m), ix(d.n)), Bxb(ix(d.n), ix(d.n));
  for (std::size_t u = 0; u < d.m; ++u) {
    for (std::size_t v = 0; v < d.m; ++v) Ax(ix(u), ix(v)) = Av[u].grad(v);
    for (std::size_t a = 0; a < d.n; ++a) Axb(ix(u), ix(a)) = Av[u].grad(d.m + a);
  }
  for (std::size_t a = 0; a < d.n; ++a) {
    for (std::size_t b = 0; b < d.n; ++b) Bxb(ix(a), ix(b)) = Bv[a].grad(d.m + b);
  }
  if (detail::condition_number(Ax) > 1e12 || detail::condition_number(Bxb) > 1e12) {
    throw ChartError("chart change is not invertible at the state");
  }

  ChartTransformReport rep;
  rep.new_state.x_leaf.resize(ix(d.m));
  rep.new_state.x_trans.resize(ix(d.n));
  for (std::size_t u = 0; u < d.m; ++u) rep.new_state.x_leaf(ix(u)) = Av[u].value();
  for (std::size_t a = 0; a < d.n; ++a) rep.new_state.x_trans(ix(a)) = Bv[a].value();
  rep.new_state.y_trans = Bxb * s.y_trans;
  rep.new_state.t = s.t;

  // The inverse expressions must undo the forward ones.
  {
    std::map<std::string, double> back;
    for (const auto& [k, v] : f.params) back.emplace(k, v);
    for (std::size_t u = 0; u < d.m; ++u) back.insert_or_assign("x" + std::to_string(u + 1), rep.new_state.x_leaf(ix(u)));
    for (std::size_t a = 0; a < d.n; ++a) back.insert_or_assign("xb" + std::to_string(a + 1), rep.new_state.x_trans(ix(a)));
    double err = 0.0;
    for (std::size_t u = 0; u < d.m; ++u) err = std::max(err, std::abs(f.leaf_inverse[u].eval(back) - s.x_leaf(ix(u))));
    for (std::size_t a = 0; a < d.n; ++a) err = std::max(err, std::abs(f.trans_inverse[a].eval(back) - s.x_trans(ix(a))));
    if (!(err <= 1e-9 * (1.0 + s.x_leaf.lpNorm<Eigen::Infinity>() + s.x_trans.lpNorm<Eigen::Infinity>()))) {
      throw ChartError("inverse chart expressions do not invert the forward map");
    }
  }

  // S' = B_xb S + d2B(y, y).
  rep.new_semispray = Bxb * S;
  for (std::size_t a = 0; a < d.n; ++a) {
    for (std::size_t b = 0; b < d.n; ++b) {
      for (std::size_t e = 0; e < d.n; ++e) {
        rep.new_semispray(ix(a)) += Bv[a].hess(d.m + b, d.m + e) * s.y_trans(ix(b)) * s.y_trans(ix(e));
      }
    }
  }

  const auto cd = constraint_derivatives(c, s);
  const Eigen::MatrixXd K = pseudo_curvature_K(d, cd, s);
  const Eigen::MatrixXd R = s_curvature(d, K, nonlinearity_tensor(d, cd), S);

  const auto cp = transform_constraint(c, f);
  const auto cdp = constraint_derivatives(cp, rep.new_state);
  rep.K_new = pseudo_curvature_K(d, cdp, rep.new_state);
  rep.R_new = s_curvature(d, rep.K_new, nonlinearity_tensor(d, cdp), rep.new_semispray);

  const Eigen::MatrixXd Binv = Bxb.inverse();
  rep.R_expected = Ax * R * Binv;
  rep.K_expected = Ax * K * Binv;
  rep.R_deviation = (rep.R_new - rep.R_expected).lpNorm<Eigen::Infinity>();
  rep.K_deviation = (rep.K_new - rep.K_expected).lpNorm<Eigen::Infinity>();
  return rep;
}

}  // namespace nonholo
