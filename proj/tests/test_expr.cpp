#include <cmath>
#include <map>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "nonholo/expr.hpp"
#include "nonholo/fields.hpp"

using nonholo::AD;
using nonholo::expr::Expr;
using nonholo::expr::Fn;
using nonholo::expr::Op;

TEST(Expr, AppellConstraintTreeShape) {
  const auto e = Expr::parse("a*sqrt(yb1^2+yb2^2)");
  const auto& r = e.root();
  ASSERT_EQ(r.op, Op::Mul);
  EXPECT_EQ(r.lhs->op, Op::Param);
  EXPECT_EQ(r.lhs->name, "a");
  ASSERT_EQ(r.rhs->op, Op::Call);
  EXPECT_EQ(r.rhs->fn, Fn::Sqrt);
  const auto& sum = *r.rhs->lhs;
  ASSERT_EQ(sum.op, Op::Add);
  ASSERT_EQ(sum.lhs->op, Op::Pow);
  EXPECT_EQ(sum.lhs->lhs->op, Op::Var);
  EXPECT_EQ(sum.lhs->lhs->name, "yb1");
  EXPECT_EQ(sum.lhs->rhs->number, 2.0);
  EXPECT_EQ(sum.rhs->lhs->name, "yb2");
  EXPECT_EQ(e.parameters(), (std::set<std::string>{"a"}));
  EXPECT_EQ(e.variables(), (std::set<std::string>{"yb1", "yb2"}));
}

TEST(Expr, Precedence) {
  EXPECT_EQ(Expr::parse("1+2*3").eval<double>({}), 7.0);
  EXPECT_EQ(Expr::parse("2^3^2").eval<double>({}), 512.0);
  EXPECT_EQ(Expr::parse("8/4/2").eval<double>({}), 1.0);
  EXPECT_EQ(Expr::parse("10-4-3").eval<double>({}), 3.0);
  EXPECT_EQ(Expr::parse("(1+2)*3").eval<double>({}), 9.0);
  EXPECT_EQ(Expr::parse("2^-1").eval<double>({}), 0.5);
}

TEST(Expr, UnaryMinusBindsLooserThanPower) {
  const auto e = Expr::parse("-x1^2");
  ASSERT_EQ(e.root().op, Op::Neg);
  EXPECT_EQ(e.root().lhs->op, Op::Pow);
  EXPECT_EQ(e.eval<double>({{"x1", 3.0}}), -9.0);
}

TEST(Expr, AppellLinearCoefficient) {
  const auto e = Expr::parse("R*yb1*cos(xb2)");
  EXPECT_EQ(e.eval<double>({{"R", 2.0}, {"yb1", 1.0}, {"xb2", 0.0}}), 2.0);
}

TEST(Expr, JetEvaluationOfBenentiConstraint) {
  const auto e = Expr::parse("yb1*yb2/yb3");
  const std::vector<double> x = {1.0, 1.0, 1.0};
  const auto j = nonholo::seed_all(x);
  const AD r = e.eval<AD>({{"yb1", j[0]}, {"yb2", j[1]}, {"yb3", j[2]}});
  EXPECT_EQ(r.value(), 1.0);
  EXPECT_EQ(r.grad(0), 1.0);
  EXPECT_EQ(r.grad(1), 1.0);
  EXPECT_EQ(r.grad(2), -1.0);
}

TEST(Expr, ConstantExpressionHasZeroGradient) {
  const auto e = Expr::parse("3*sin(0.5)+2");
  const std::vector<double> x = {0.3};
  const auto j = nonholo::seed_all(x);
  const AD r = e.eval<AD>({{"x1", j[0]}});
  const auto d = nonholo::derivatives_of(r, 1);
  EXPECT_EQ(d.gradient(0), 0.0);
  EXPECT_EQ(d.hessian(0, 0), 0.0);
}

TEST(Expr, SyntaxErrorsCarryOffsets) {
  try {
    Expr::parse("1 + * 2");
    FAIL() << "expected a parse error";
  } catch (const nonholo::ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(Expr::parse("(1+2"), nonholo::ParseError);
  EXPECT_THROW(Expr::parse(""), nonholo::ParseError);
  EXPECT_THROW(Expr::parse("1 2"), nonholo::ParseError);
}

TEST(Expr, UnknownFunction) {
  try {
    Expr::parse("x1 + cosh(x1)");
    FAIL() << "expected unknown function";
  } catch (const nonholo::UnknownFunction& e) {
    EXPECT_EQ(e.offset(), 5u);
  }
}

TEST(Expr, UnboundNamesAndDomainErrors) {
  EXPECT_THROW(Expr::parse("a+1").eval<double>({}), nonholo::UnboundName);
  EXPECT_THROW(Expr::parse("sqrt(x1)").eval<double>({{"x1", -1.0}}), nonholo::DomainError);
  EXPECT_THROW(Expr::parse("log(x1)").eval<double>({{"x1", 0.0}}), nonholo::DomainError);
  EXPECT_THROW(Expr::parse("1/x1").eval<double>({{"x1", 0.0}}), nonholo::DomainError);
}

TEST(Expr, AbsIsFlaggedNonSmooth) {
  EXPECT_TRUE(Expr::parse("abs(yb1)*2").uses_nonsmooth());
  EXPECT_FALSE(Expr::parse("sqrt(yb1^2)").uses_nonsmooth());
}

TEST(Expr, RealAndJetValuesAgree) {
  const auto e = Expr::parse("sin(x1)*exp(xb1/3) - tan(0.2*yb1)^2 + log(2+cos(x1*xb1)) / sqrt(1+yb1^2)");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const std::vector<double> x = {U(rng), U(rng), U(rng)};
    const double plain = e.eval<double>({{"x1", x[0]}, {"xb1", x[1]}, {"yb1", x[2]}});
    const auto j = nonholo::seed_all(x);
    const AD r = e.eval<AD>({{"x1", j[0]}, {"xb1", j[1]}, {"yb1", j[2]}});
    EXPECT_LE(std::abs(plain - r.value()), std::abs(plain) * 2.3e-16);
  }
}

TEST(Expr, CompiledProgramMatchesTreeEvaluation) {
  const nonholo::ChartDims d{1, 2};
  const auto e = Expr::parse("k*y1*yb2 + sin(xb1)*x1 - t^2");
  const auto prog = nonholo::detail::compile_in(e, d, nonholo::Slots::W, {{"k", 1.5}}, "test");
  // w = (x1, xb1, xb2, y1, yb1, yb2, t)
  const std::vector<double> w = {0.3, -0.2, 0.9, 1.1, 0.4, -0.7, 2.0};
  const double direct = e.eval<double>({{"k", 1.5}, {"x1", 0.3}, {"xb1", -0.2}, {"xb2", 0.9}, {"y1", 1.1},
                                        {"yb1", 0.4}, {"yb2", -0.7}, {"t", 2.0}});
  EXPECT_EQ(prog(std::span<const double>(w)), direct);
}

TEST(Expr, ChartNamesAreCheckedAgainstTheLayout) {
  const nonholo::ChartDims d{1, 2};
  EXPECT_THROW(nonholo::detail::compile_in(Expr::parse("xb3"), d, nonholo::Slots::Z, {}, "C"), nonholo::ConfigError);
  EXPECT_THROW(nonholo::detail::compile_in(Expr::parse("y1"), d, nonholo::Slots::Z, {}, "C"), nonholo::ConfigError);
  EXPECT_THROW(nonholo::detail::compile_in(Expr::parse("q"), d, nonholo::Slots::Z, {}, "C"), nonholo::ConfigError);
  EXPECT_NO_THROW(nonholo::detail::compile_in(Expr::parse("y1"), d, nonholo::Slots::W, {}, "L"));
}

// Random trees for the round-trip property.
namespace {

std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 9);
  static const char* leaves[] = {"x1", "xb2", "yb1", "t", "alpha", "2", "0.5", "1e-3", "3.25", "k2"};
  static const char* fns[] = {"sqrt", "sin", "cos", "tan", "exp", "log", "abs"};
  if (depth == 0) return leaves[pick(rng)];
  switch (pick(rng) % 7) {
    case 0: return random_expr(rng, depth - 1) + "+" + random_expr(rng, depth - 1);
    case 1: return random_expr(rng, depth - 1) + "-" + random_expr(rng, depth - 1);
    case 2: return "(" + random_expr(rng, depth - 1) + ")*" + random_expr(rng, depth - 1);
    case 3: return random_expr(rng, depth - 1) + "/(" + random_expr(rng, depth - 1) + ")";
    case 4: return "(" + random_expr(rng, depth - 1) + ")^" + random_expr(rng, 0);
    case 5: return "-" + random_expr(rng, depth - 1);
    default: return std::string(fns[pick(rng) % 7]) + "(" + random_expr(rng, depth - 1) + ")";
  }
}

}  // namespace

TEST(Expr, PrintParseRoundTrip) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 500; ++k) {
    const auto src = random_expr(rng, 1 + k % 5);
    const auto e = Expr::parse(src);
    const auto printed = e.to_string();
    const auto again = Expr::parse(printed);
    EXPECT_TRUE(e.structurally_equal(again)) << src << " -> " << printed;
    EXPECT_EQ(again.to_string(), printed);
  }
}
