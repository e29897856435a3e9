#pragma once

// Equations of motion on the constraint manifold.
//
// Notation: P = dL/dy evaluated at (x, C(x, y_trans), y_trans), Lc = L o C.
//   h_ab  = P_u d2C^u/dy^a dy^b - d2Lc/dy^a dy^b
//   F_a   = d2Lc/dy^a dx^b y^b + d2Lc/dy^a dx^v C^v - dLc/dx^a - C^u_a dLc/dx^u
//           [+ d2Lc/dy^a dt - P_u d2C^u/dt dy^a  when time-dependent]
//   S     = h^{-1} (F - P_leaf . K)
// With E_i = d/dt dL/dy^i - dL/dx^i along a jet (x' = C, xb' = y, y' = a),
// the constrained equations read E_a + C^u_a E_u = 0, and off shell
//   E_a + C^u_a E_u = -h a + F - P_leaf . K.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/errors.hpp"
#include "nonholo/geometry.hpp"
#include "nonholo/model.hpp"
#include "nonholo/scalar.hpp"

namespace nonholo {

namespace testing_hooks {
/// Negates the force term everywhere. Only for demonstrating that the
/// verification suites detect a corrupted assembly.
inline std::atomic<bool> flip_force_sign{false};
}  // namespace testing_hooks

constexpr double kDefaultCondLimit = 1e12;

/// Everything needed at one state: C over z, Lc over z, L over w.
struct PointEval {
  ChartDims dims;
  TransState state;
  bool time_dependent = false;
  ConstraintDerivs C;
  Derivatives Lc;
  Derivatives L;

  Eigen::VectorXd p_leaf() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(dims.m));
    for (std::size_t u = 0; u < dims.m; ++u) p(detail::ix(u)) = L.gradient(detail::ix(dims.w_yl(u)));
    return p;
  }
  Eigen::VectorXd p_trans() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(dims.n));
    for (std::size_t a = 0; a < dims.n; ++a) p(detail::ix(a)) = L.gradient(detail::ix(dims.w_yt(a)));
    return p;
  }
  /// C^u_a = dC^u/dy^a, m x n.
  Eigen::MatrixXd C_y() const {
    return C.jac.block(0, detail::ix(dims.z_yt(0)), detail::ix(dims.m), detail::ix(dims.n));
  }
};

inline PointEval evaluate_point(const LagrangianField& L, const ConstraintMap& C, const TransState& s) {
  check_compatible(L, C);
  const auto& d = C.dims;
  PointEval pe;
  pe.dims = d;
  pe.state = s;
  pe.time_dependent = L.time_dependent || C.time_dependent;

  const auto z = z_values(d, s);
  const auto zj = seed_all(z);
  const auto cj = C.eval(zj);
  if (cj.size() != d.m) throw InvalidArgument("constraint returned the wrong number of components");
  pe.C.value.resize(detail::ix(d.m));
  pe.C.jac.resize(detail::ix(d.m), detail::ix(d.z_size()));
  for (std::size_t u = 0; u < d.m; ++u) {
    auto dv = derivatives_of(cj[u], d.z_size());
    pe.C.value(detail::ix(u)) = dv.value;
    pe.C.jac.row(detail::ix(u)) = dv.gradient.transpose();
    pe.C.hess.push_back(std::move(dv.hessian));
  }

  pe.Lc = derivatives_of(L.f(w_from_z(d, zj, cj)), d.z_size());

  const auto w = w_values(d, s, pe.C.value);
  pe.L = derivatives_of(L.f(seed_all(w)), d.w_size());
  return pe;
}

struct HForm {
  Eigen::MatrixXd h;
  Eigen::MatrixXd h_inv;
  double cond = 0.0;
};

inline Eigen::MatrixXd h_matrix(const PointEval& pe) {
  using detail::ix;
  const auto& d = pe.dims;
  const Eigen::VectorXd p = pe.p_leaf();
  Eigen::MatrixXd h(ix(d.n), ix(d.n));
  for (std::size_t a = 0; a < d.n; ++a) {
    for (std::size_t b = 0; b < d.n; ++b) {
      double acc = 0.0;
      for (std::size_t u = 0; u < d.m; ++u) acc += p(ix(u)) * pe.C.hess[u](ix(d.z_yt(a)), ix(d.z_yt(b)));
      h(ix(a), ix(b)) = acc - pe.Lc.hessian(ix(d.z_yt(a)), ix(d.z_yt(b)));
    }
  }
  return 0.5 * (h + h.transpose());
}

inline HForm h_form(const PointEval& pe, double cond_limit = kDefaultCondLimit) {
  HForm r;
  r.h = h_matrix(pe);
  r.cond = detail::condition_number(r.h);
  if (!(r.cond <= cond_limit)) {
    throw Degenerate("bilinear form h is degenerate (cond(h)=" + format_double(r.cond) + ")", r.cond);
  }
  r.h_inv = r.h.fullPivLu().inverse();
  return r;
}

inline HForm h_form(const LagrangianField& L, const ConstraintMap& C, const TransState& s,
                    double cond_limit = kDefaultCondLimit) {
  return h_form(evaluate_point(L, C, s), cond_limit);
}

struct Regularity {
  bool regular = false;
  double cond = std::numeric_limits<double>::infinity();
};

/// Never throws for a degenerate or undefined h; reports cond = inf when the
/// point is outside the domain of L or C.
inline Regularity is_C_regular(const LagrangianField& L, const ConstraintMap& C, const TransState& s,
                               double cond_limit = kDefaultCondLimit) {
  Regularity r;
  try {
    r.cond = detail::condition_number(h_matrix(evaluate_point(L, C, s)));
  } catch (const DomainError&) {
    r.cond = std::numeric_limits<double>::infinity();
  }
  r.regular = r.cond <= cond_limit;
  return r;
}

namespace detail {

inline Eigen::VectorXd force_base(const PointEval& pe) {
  const auto& d = pe.dims;
  const auto& H = pe.Lc.hessian;
  const auto& g = pe.Lc.gradient;
  Eigen::VectorXd F(ix(d.n));
  for (std::size_t a = 0; a < d.n; ++a) {
    const auto ya = ix(d.z_yt(a));
    double acc = 0.0;
    for (std::size_t b = 0; b < d.n; ++b) acc += H(ya, ix(d.z_xt(b))) * pe.state.y_trans(ix(b));
    for (std::size_t v = 0; v < d.m; ++v) acc += H(ya, ix(d.z_xl(v))) * pe.C.value(ix(v));
    acc -= g(ix(d.z_xt(a)));
    for (std::size_t u = 0; u < d.m; ++u) acc -= pe.C.jac(ix(u), ya) * g(ix(d.z_xl(u)));
    F(ix(a)) = acc;
  }
  return F;
}

inline Eigen::VectorXd force_time_terms(const PointEval& pe) {
  const auto& d = pe.dims;
  const Eigen::VectorXd p = pe.p_leaf();
  const auto t = ix(d.z_t());
  Eigen::VectorXd F(ix(d.n));
  for (std::size_t a = 0; a < d.n; ++a) {
    const auto ya = ix(d.z_yt(a));
    double acc = pe.Lc.hessian(ya, t);
    for (std::size_t u = 0; u < d.m; ++u) acc -= p(ix(u)) * pe.C.hess[u](t, ya);
    F(ix(a)) = acc;
  }
  return F;
}

inline Eigen::VectorXd apply_hooks(Eigen::VectorXd F) {
  if (testing_hooks::flip_force_sign.load(std::memory_order_relaxed)) F = -F;
  return F;
}

}  // namespace detail

/// Force covector for whatever time flags the point carries.
inline Eigen::VectorXd force(const PointEval& pe) {
  Eigen::VectorXd F = detail::force_base(pe);
  if (pe.time_dependent) F += detail::force_time_terms(pe);
  return detail::apply_hooks(std::move(F));
}

/// F for time-independent L and C.
inline Eigen::VectorXd force_F(const LagrangianField& L, const ConstraintMap& C, const TransState& s) {
  if (L.time_dependent || C.time_dependent) {
    throw TimeDependentInput("force_F needs time-independent L and C; use force_F_timedep");
  }
  return detail::apply_hooks(detail::force_base(evaluate_point(L, C, s)));
}

/// F for a time-dependent constraint with a time-independent Lagrangian.
inline Eigen::VectorXd force_F_timedep(const LagrangianField& L, const ConstraintMap& C, const TransState& s) {
  if (!C.time_dependent || L.time_dependent) {
    throw WrongTimeFlags("force_F_timedep needs a time-dependent constraint and a time-independent Lagrangian");
  }
  const auto pe = evaluate_point(L, C, s);
  Eigen::VectorXd F = detail::force_base(pe);
  F += detail::force_time_terms(pe);
  return detail::apply_hooks(std::move(F));
}

/// All assembled quantities at a regular state.
struct Analysis {
  PointEval pe;
  HForm h;
  Eigen::VectorXd F;
  Eigen::MatrixXd K;
  Tensor3 Ctensor;
  Eigen::VectorXd p_leaf;
  Eigen::VectorXd S;
};

inline Analysis analyze(const LagrangianField& L, const ConstraintMap& C, const TransState& s,
                        double cond_limit = kDefaultCondLimit) {
  Analysis an;
  an.pe = evaluate_point(L, C, s);
  an.h = h_form(an.pe, cond_limit);
  an.F = force(an.pe);
  an.K = pseudo_curvature_K(an.pe.dims, an.pe.C, s);
  an.Ctensor = nonlinearity_tensor(an.pe.dims, an.pe.C);
  an.p_leaf = an.pe.p_leaf();
  const Eigen::VectorXd rhs = an.F - an.K.transpose() * an.p_leaf;
  an.S = an.h.h.fullPivLu().solve(rhs);
  return an;
}

inline Eigen::VectorXd semispray(const LagrangianField& L, const ConstraintMap& C, const TransState& s) {
  return analyze(L, C, s).S;
}

/// -h a + F - P_leaf . K, the right-hand side of the off-shell identity.
inline Eigen::VectorXd offshell_rhs(const Analysis& an, const Eigen::VectorXd& a) {
  return -an.h.h * a + an.F - an.K.transpose() * an.p_leaf;
}

/// Raw constrained equations E_a + C^u_a E_u along the jet, with the total
/// derivatives expanded by the chain rule (dy_leaf/dt = dC/dt along the jet).
inline Eigen::VectorXd residual_eqlagc(const PointEval& pe, const Eigen::VectorXd& a) {
  using detail::ix;
  const auto& d = pe.dims;
  if (static_cast<std::size_t>(a.size()) != d.n) throw InvalidArgument("acceleration must have n components");
  // z-velocity of the jet
  Eigen::VectorXd zdot(ix(d.z_size()));
  for (std::size_t u = 0; u < d.m; ++u) zdot(ix(d.z_xl(u))) = pe.C.value(ix(u));
  for (std::size_t b = 0; b < d.n; ++b) {
    zdot(ix(d.z_xt(b))) = pe.state.y_trans(ix(b));
    zdot(ix(d.z_yt(b))) = a(ix(b));
  }
  zdot(ix(d.z_t())) = 1.0;
  // w-velocity
  Eigen::VectorXd wdot(ix(d.w_size()));
  for (std::size_t u = 0; u < d.m; ++u) {
    wdot(ix(d.w_xl(u))) = pe.C.value(ix(u));
    wdot(ix(d.w_yl(u))) = pe.C.jac.row(ix(u)).dot(zdot);
  }
  for (std::size_t b = 0; b < d.n; ++b) {
    wdot(ix(d.w_xt(b))) = pe.state.y_trans(ix(b));
    wdot(ix(d.w_yt(b))) = a(ix(b));
  }
  wdot(ix(d.w_t())) = 1.0;

  const Eigen::VectorXd Pdot = pe.L.hessian * wdot;
  Eigen::VectorXd E_leaf(ix(d.m)), E_trans(ix(d.n));
  for (std::size_t u = 0; u < d.m; ++u) E_leaf(ix(u)) = Pdot(ix(d.w_yl(u))) - pe.L.gradient(ix(d.w_xl(u)));
  for (std::size_t b = 0; b < d.n; ++b) E_trans(ix(b)) = Pdot(ix(d.w_yt(b))) - pe.L.gradient(ix(d.w_xt(b)));
  return E_trans + pe.C_y().transpose() * E_leaf;
}

inline Eigen::VectorXd residual_eqlagc(const LagrangianField& L, const ConstraintMap& C, const Jet& j) {
  return residual_eqlagc(evaluate_point(L, C, j.state), j.a_trans);
}

/// S-curvature at the analysed state, including d2C/dt dy for
/// time-dependent constraints.
inline Eigen::MatrixXd s_curvature_at(const Analysis& an) {
  using detail::ix;
  const auto& d = an.pe.dims;
  Eigen::MatrixXd R = s_curvature(d, an.K, an.Ctensor, an.S);
  if (an.pe.time_dependent) {
    for (std::size_t u = 0; u < d.m; ++u) {
      for (std::size_t a = 0; a < d.n; ++a) R(ix(u), ix(a)) += an.pe.C.hess[u](ix(d.z_t()), ix(d.z_yt(a)));
    }
  }
  return R;
}

/// d/dt dLc/dy^a - dLc/dx^a - C^u_a dLc/dx^u - P_u R^u_a along the jet.
inline Eigen::VectorXd residual_theorem_form(const Analysis& an, const Eigen::VectorXd& a) {
  using detail::ix;
  const auto& pe = an.pe;
  const auto& d = pe.dims;
  if (static_cast<std::size_t>(a.size()) != d.n) throw InvalidArgument("acceleration must have n components");
  Eigen::VectorXd zdot(ix(d.z_size()));
  for (std::size_t u = 0; u < d.m; ++u) zdot(ix(d.z_xl(u))) = pe.C.value(ix(u));
  for (std::size_t b = 0; b < d.n; ++b) {
    zdot(ix(d.z_xt(b))) = pe.state.y_trans(ix(b));
    zdot(ix(d.z_yt(b))) = a(ix(b));
  }
  zdot(ix(d.z_t())) = 1.0;
  const Eigen::MatrixXd R = s_curvature_at(an);
  Eigen::VectorXd r(ix(d.n));
  for (std::size_t b = 0; b < d.n; ++b) {
    const auto yb = ix(d.z_yt(b));
    double acc = pe.Lc.hessian.row(yb).dot(zdot) - pe.Lc.gradient(ix(d.z_xt(b)));
    for (std::size_t u = 0; u < d.m; ++u) {
      acc -= pe.C.jac(ix(u), yb) * pe.Lc.gradient(ix(d.z_xl(u)));
      acc -= an.p_leaf(ix(u)) * R(ix(u), ix(b));
    }
    r(ix(b)) = acc;
  }
  return r;
}

inline Eigen::VectorXd residual_theorem_form(const LagrangianField& L, const ConstraintMap& C, const Jet& j) {
  return residual_theorem_form(analyze(L, C, j.state), j.a_trans);
}

}  // namespace nonholo
