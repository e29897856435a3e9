#pragma once

// Lagrangians, constraints and implicit constraints defined by expressions.
// Variable names follow the chart: x1..xm, xb1..xbn, yb1..ybn, t, and
// y1..ym only where leaf velocities are arguments (L and implicit G).

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/errors.hpp"
#include "nonholo/expr.hpp"
#include "nonholo/implicit.hpp"
#include "nonholo/model.hpp"

namespace nonholo {

enum class Slots { Z, W, X };

namespace detail {

struct ParsedName {
  std::string prefix;
  std::size_t index = 0;  // zero-based
};

inline std::optional<ParsedName> split_chart_name(std::string_view name) {
  if (!expr::is_chart_variable(name)) return std::nullopt;
  if (name == "t") return ParsedName{"t", 0};
  std::size_t p = (name.starts_with("xb") || name.starts_with("yb")) ? 2 : 1;
  return ParsedName{std::string(name.substr(0, p)), std::stoul(std::string(name.substr(p))) - 1};
}

inline std::optional<std::size_t> slot_for(const ChartDims& d, Slots layout, const std::string& name,
                                           const std::string& context) {
  const auto pn = split_chart_name(name);
  if (!pn) return std::nullopt;
  auto out_of_range = [&](std::size_t limit) {
    if (pn->index >= limit) throw ConfigError("variable '" + name + "' is outside the chart in " + context);
  };
  if (pn->prefix == "t") {
    if (layout == Slots::X) throw ConfigError("time is not allowed in " + context);
    return layout == Slots::Z ? d.z_t() : d.w_t();
  }
  if (pn->prefix == "x") {
    out_of_range(d.m);
    return layout == Slots::W ? d.w_xl(pn->index) : d.z_xl(pn->index);
  }
  if (pn->prefix == "xb") {
    out_of_range(d.n);
    return layout == Slots::W ? d.w_xt(pn->index) : d.z_xt(pn->index);
  }
  if (pn->prefix == "yb") {
    out_of_range(d.n);
    if (layout == Slots::X) throw ConfigError("velocities are not allowed in " + context);
    return layout == Slots::W ? d.w_yt(pn->index) : d.z_yt(pn->index);
  }
  // leaf velocity
  out_of_range(d.m);
  if (layout != Slots::W) throw ConfigError("leaf velocity '" + name + "' is only legal in L or G, not in " + context);
  return d.w_yl(pn->index);
}

inline expr::Program compile_in(const expr::Expr& e, const ChartDims& d, Slots layout,
                                const std::map<std::string, double>& params, const std::string& context) {
  try {
    return expr::Program::compile(
        e, [&](const std::string& name) { return slot_for(d, layout, name, context); }, params);
  } catch (const UnboundName& u) {
    throw ConfigError("unknown parameter '" + u.name() + "' in " + context);
  }
}

inline bool uses_time(const expr::Expr& e) { return e.variables().count("t") > 0; }

}  // namespace detail

inline LagrangianField lagrangian_from_expr(const expr::Expr& e, const ChartDims& d,
                                            const std::map<std::string, double>& params) {
  d.validate();
  LagrangianField L;
  L.dims = d;
  L.time_dependent = detail::uses_time(e);
  auto prog = detail::compile_in(e, d, Slots::W, params, "the Lagrangian");
  L.f = [prog](ADSpan w) { return prog(w); };
  return L;
}

inline ConstraintMap constraint_from_exprs(const std::vector<expr::Expr>& es, const ChartDims& d,
                                           const std::map<std::string, double>& params,
                                           ConstraintKind kind = ConstraintKind::Nonlinear) {
  d.validate();
  if (es.size() != d.m) throw ConfigError("constraint needs exactly m expressions");
  ConstraintMap c;
  c.dims = d;
  c.kind = kind;
  std::vector<expr::Program> progs;
  for (std::size_t u = 0; u < d.m; ++u) {
    progs.push_back(detail::compile_in(es[u], d, Slots::Z, params, "constraint component " + std::to_string(u + 1)));
    c.time_dependent = c.time_dependent || detail::uses_time(es[u]);
  }
  c.eval = [progs](ADSpan z) {
    std::vector<AD> out;
    out.reserve(progs.size());
    for (const auto& p : progs) out.push_back(p(z));
    return out;
  };
  return c;
}

namespace detail {

inline CoefficientFn coefficient_fn(const std::vector<expr::Expr>& es, const ChartDims& d,
                                    const std::map<std::string, double>& params, const std::string& what) {
  std::vector<expr::Program> progs;
  for (std::size_t i = 0; i < es.size(); ++i) {
    progs.push_back(compile_in(es[i], d, Slots::X, params, what + " entry " + std::to_string(i + 1)));
  }
  return [progs](ADSpan x) {
    std::vector<AD> out;
    out.reserve(progs.size());
    for (const auto& p : progs) out.push_back(p(x));
    return out;
  };
}

}  // namespace detail

/// `coeffs` lists the m x n coefficient matrix row-major.
inline ConstraintMap linear_from_exprs(const std::vector<expr::Expr>& coeffs, const ChartDims& d,
                                       const std::map<std::string, double>& params) {
  if (coeffs.size() != d.m * d.n) throw ConfigError("linear constraint needs m*n coefficient expressions");
  return lift_linear(d, detail::coefficient_fn(coeffs, d, params, "linear coefficient"));
}

inline ConstraintMap affine_from_exprs(const std::vector<expr::Expr>& coeffs, const std::vector<expr::Expr>& offset,
                                       const ChartDims& d, const std::map<std::string, double>& params) {
  if (coeffs.size() != d.m * d.n) throw ConfigError("affine constraint needs m*n coefficient expressions");
  if (offset.size() != d.m) throw ConfigError("affine constraint needs m offset expressions");
  return lift_affine(d, detail::coefficient_fn(coeffs, d, params, "affine coefficient"),
                     detail::coefficient_fn(offset, d, params, "affine offset"));
}

inline ImplicitConstraint implicit_from_exprs(const std::vector<expr::Expr>& G, const std::vector<expr::Expr>& branch,
                                              const ChartDims& d, const std::map<std::string, double>& params,
                                              ImplicitKind kind) {
  d.validate();
  if (G.size() != d.m) throw ConfigError("implicit constraint needs exactly m expressions");
  if (branch.size() != d.m) throw ConfigError("implicit constraint needs m branch expressions");
  ImplicitConstraint ic;
  ic.dims = d;
  ic.kind = kind;
  std::vector<expr::Program> gp, bp;
  for (std::size_t u = 0; u < d.m; ++u) {
    gp.push_back(detail::compile_in(G[u], d, Slots::W, params, "implicit constraint " + std::to_string(u + 1)));
    bp.push_back(detail::compile_in(branch[u], d, Slots::Z, params, "branch " + std::to_string(u + 1)));
    ic.time_dependent = ic.time_dependent || detail::uses_time(G[u]);
  }
  ic.G = [gp](ADSpan w) {
    std::vector<AD> out;
    out.reserve(gp.size());
    for (const auto& p : gp) out.push_back(p(w));
    return out;
  };
  ic.branch_hint = [bp](const std::vector<double>& z) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(bp.size()));
    for (std::size_t u = 0; u < bp.size(); ++u) y(static_cast<Eigen::Index>(u)) = bp[u](std::span<const double>(z));
    return y;
  };
  return ic;
}

/// Scalar function of the state (z layout) from an expression.
inline std::function<double(const TransState&)> state_function(const expr::Expr& e, const ChartDims& d,
                                                               const std::map<std::string, double>& params,
                                                               const std::string& context) {
  auto prog = detail::compile_in(e, d, Slots::Z, params, context);
  return [prog, d](const TransState& s) {
    const auto z = z_values(d, s);
    return prog(std::span<const double>(z));
  };
}

}  // namespace nonholo
