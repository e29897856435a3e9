#pragma once

// Small builders shared by the unit tests.

#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/nonholo.hpp"

namespace th {

using Params = std::map<std::string, double>;

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline nonholo::TransState state(std::initializer_list<double> xl, std::initializer_list<double> xt,
                                 std::initializer_list<double> yt, std::optional<double> t = std::nullopt) {
  return {vec(xl), vec(xt), vec(yt), t};
}

inline nonholo::LagrangianField lag(const std::string& src, nonholo::ChartDims d, const Params& p = {}) {
  return nonholo::lagrangian_from_expr(nonholo::expr::Expr::parse(src), d, p);
}

inline std::vector<nonholo::expr::Expr> parse_all(const std::vector<std::string>& src) {
  std::vector<nonholo::expr::Expr> out;
  for (const auto& s : src) out.push_back(nonholo::expr::Expr::parse(s));
  return out;
}

inline nonholo::ConstraintMap con(const std::vector<std::string>& src, nonholo::ChartDims d, const Params& p = {}) {
  return nonholo::constraint_from_exprs(parse_all(src), d, p);
}

inline nonholo::ConstraintMap linear(const std::vector<std::string>& coeffs, nonholo::ChartDims d, const Params& p = {}) {
  return nonholo::linear_from_exprs(parse_all(coeffs), d, p);
}

inline nonholo::ConstraintMap affine(const std::vector<std::string>& coeffs, const std::vector<std::string>& offset,
                                     nonholo::ChartDims d, const Params& p = {}) {
  return nonholo::affine_from_exprs(parse_all(coeffs), parse_all(offset), d, p);
}

}  // namespace th
