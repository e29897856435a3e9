#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "nonholo/scalar.hpp"
#include "oracles.hpp"

using nonholo::AD;
using nonholo::Jet2;

namespace {

std::vector<std::size_t> idx(std::initializer_list<std::size_t> l) { return l; }

}  // namespace

TEST(Scalar, SquareOfSeededValue) {
  const std::vector<double> x = {3.0};
  const auto j = nonholo::seed(x, idx({0}));
  const AD r = j[0] * j[0];
  EXPECT_EQ(r.value(), 9.0);
  EXPECT_EQ(r.grad(0), 6.0);
  EXPECT_EQ(r.hess(0, 0), 2.0);
}

TEST(Scalar, BilinearProduct) {
  const std::vector<double> x = {2.0, 5.0};
  const auto j = nonholo::seed(x, idx({0, 1}));
  const AD r = j[0] * j[1];
  EXPECT_EQ(r.value(), 10.0);
  EXPECT_EQ(r.grad(0), 5.0);
  EXPECT_EQ(r.grad(1), 2.0);
  EXPECT_EQ(r.hess(0, 0), 0.0);
  EXPECT_EQ(r.hess(0, 1), 1.0);
  EXPECT_EQ(r.hess(1, 0), 1.0);
  EXPECT_EQ(r.hess(1, 1), 0.0);
}

TEST(Scalar, Sine) {
  const std::vector<double> x = {0.7};
  const AD r = sin(nonholo::seed(x, idx({0}))[0]);
  EXPECT_DOUBLE_EQ(r.grad(0), std::cos(0.7));
  EXPECT_DOUBLE_EQ(r.hess(0, 0), -std::sin(0.7));
}

TEST(Scalar, EvalWithDerivativesPolynomial) {
  const std::vector<double> x = {2.0, 3.0};
  const auto d = nonholo::eval_with_derivatives([](nonholo::ADSpan v) { return v[0] * v[0] * v[1]; }, x, idx({0, 1}));
  EXPECT_EQ(d.value, 12.0);
  EXPECT_EQ(d.gradient(0), 12.0);
  EXPECT_EQ(d.gradient(1), 4.0);
  EXPECT_EQ(d.hessian(0, 0), 6.0);
  EXPECT_EQ(d.hessian(0, 1), 4.0);
  EXPECT_EQ(d.hessian(1, 0), 4.0);
  EXPECT_EQ(d.hessian(1, 1), 0.0);
}

TEST(Scalar, ConstantHasZeroDerivatives) {
  const std::vector<double> x = {1.0, -2.0};
  const auto d = nonholo::eval_with_derivatives([](nonholo::ADSpan) { return AD(4.5); }, x, idx({0, 1}));
  EXPECT_EQ(d.value, 4.5);
  EXPECT_EQ(d.gradient.norm(), 0.0);
  EXPECT_EQ(d.hessian.norm(), 0.0);
}

TEST(Scalar, EuclideanNormMatchesHandAndFiniteDifferences) {
  const std::vector<double> x = {3.0, 4.0};
  auto f = [](nonholo::ADSpan v) { return sqrt(v[0] * v[0] + v[1] * v[1]); };
  const auto d = nonholo::eval_with_derivatives(f, x, idx({0, 1}));
  EXPECT_DOUBLE_EQ(d.value, 5.0);
  EXPECT_NEAR(d.gradient(0), 0.6, 1e-15);
  EXPECT_NEAR(d.gradient(1), 0.8, 1e-15);
  EXPECT_NEAR(d.hessian(0, 0), 16.0 / 125.0, 1e-15);
  EXPECT_NEAR(d.hessian(0, 1), -12.0 / 125.0, 1e-15);
  EXPECT_NEAR(d.hessian(1, 1), 9.0 / 125.0, 1e-15);

  auto fv = [](const std::vector<double>& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1]); };
  const auto g_fd = oracle::fd_gradient(fv, x);
  EXPECT_LT(oracle::rel_err(g_fd, d.gradient), 1e-9);
  const auto H_fd = oracle::fd_jacobian([&](const std::vector<double>& p) { return oracle::fd_gradient(fv, p, 1e-4); }, x, 1e-4);
  EXPECT_LT(oracle::rel_err(H_fd, d.hessian), 1e-6);
}

TEST(Scalar, NonSeededEntriesAreConstants) {
  const std::vector<double> x = {2.0, 7.0};
  const auto d = nonholo::eval_with_derivatives([](nonholo::ADSpan v) { return v[0] * v[1]; }, x, idx({1}));
  ASSERT_EQ(d.gradient.size(), 1);
  EXPECT_EQ(d.gradient(0), 2.0);
  EXPECT_EQ(d.hessian(0, 0), 0.0);
}

TEST(Scalar, SeedRejectsDuplicatesAndOutOfRange) {
  const std::vector<double> x = {1.0, 2.0};
  EXPECT_THROW(nonholo::seed(x, idx({0, 0})), nonholo::InvalidArgument);
  EXPECT_THROW(nonholo::seed(x, idx({2})), nonholo::InvalidArgument);
}

TEST(Scalar, DomainErrorsPropagate) {
  const std::vector<double> x = {-1.0};
  EXPECT_THROW(nonholo::eval_with_derivatives([](nonholo::ADSpan v) { return sqrt(v[0]); }, x, idx({0})),
               nonholo::DomainError);
  const std::vector<double> z = {0.0};
  EXPECT_THROW(nonholo::eval_with_derivatives([](nonholo::ADSpan v) { return log(v[0]); }, z, idx({0})),
               nonholo::DomainError);
}

TEST(Scalar, QuotientAndPowerRules) {
  const std::vector<double> x = {1.5, 0.4};
  auto f = [](nonholo::ADSpan v) { return v[0] / (1.0 + v[1] * v[1]) + pow(v[0], 3.0) - pow(v[0], v[1]); };
  const auto d = nonholo::eval_with_derivatives(f, x, idx({0, 1}));
  auto fv = [](const std::vector<double>& p) {
    return p[0] / (1.0 + p[1] * p[1]) + std::pow(p[0], 3.0) - std::pow(p[0], p[1]);
  };
  EXPECT_LT(oracle::rel_err(oracle::fd_gradient(fv, x), d.gradient), 1e-9);
}

TEST(Scalar, NestedJetsGiveThirdOrderInformation) {
  // Inner jets carry d/dx, outer jets carry d/dx again: the outer gradient of
  // the inner gradient of x^4 at 2 is 12 x^2 = 48.
  using J2 = Jet2<AD>;
  const AD xi = AD::variable(2.0, 1, 0);
  const J2 xo = J2::variable(xi, 1, 0);
  const J2 r = xo * xo * xo * xo;
  EXPECT_DOUBLE_EQ(r.value().value(), 16.0);
  EXPECT_DOUBLE_EQ(r.grad(0).value(), 32.0);
  EXPECT_DOUBLE_EQ(r.grad(0).grad(0), 48.0);
  EXPECT_DOUBLE_EQ(r.hess(0, 0).value(), 48.0);
}

// Random expression trees evaluated generically.
namespace {

struct RNode {
  int kind;  // 0 var, 1 const, 2 add, 3 mul, 4 sub, 5 sin, 6 cos, 7 exp, 8 div-by-(1+x^2), 9 sqrt(1+x^2)
  int var = 0;
  double c = 0.0;
  int a = -1, b = -1;
};

struct RTree {
  std::vector<RNode> nodes;
  int root = -1;

  template <typename S>
  S eval(int i, const std::vector<S>& x) const {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    using std::cos;
    using std::exp;
    using std::sin;
    using std::sqrt;
    switch (n.kind) {
      case 0: return x[static_cast<std::size_t>(n.var)];
      case 1: return S(n.c);
      case 2: return eval(n.a, x) + eval(n.b, x);
      case 3: return eval(n.a, x) * eval(n.b, x);
      case 4: return eval(n.a, x) - eval(n.b, x);
      case 5: return sin(eval(n.a, x));
      case 6: return cos(eval(n.a, x));
      case 7: return exp(S(0.3) * eval(n.a, x));
      case 8: {
        const S v = eval(n.a, x);
        return eval(n.b, x) / (S(1.0) + v * v);
      }
      default: {
        const S v = eval(n.a, x);
        return sqrt(S(1.0) + v * v);
      }
    }
  }
};

int grow(RTree& t, std::mt19937_64& rng, int depth, int nvars) {
  std::uniform_int_distribution<int> leaf(0, 1), op(2, 9), var(0, nvars - 1);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  RNode n;
  if (depth == 0) {
    n.kind = leaf(rng) == 0 ? 0 : 1;
    if (n.kind == 0) n.var = var(rng);
    n.c = U(rng);
  } else {
    n.kind = op(rng);
    n.a = grow(t, rng, depth - 1, nvars);
    if (n.kind <= 4 || n.kind == 8) n.b = grow(t, rng, depth - 1, nvars);
  }
  t.nodes.push_back(n);
  return static_cast<int>(t.nodes.size()) - 1;
}

}  // namespace

TEST(Scalar, RandomCompositionsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int nvars = 3;
  for (int k = 0; k < 100; ++k) {
    RTree t;
    t.root = grow(t, rng, 2 + k % 3, nvars);
    std::vector<double> x(nvars);
    for (auto& v : x) v = U(rng);
    const auto jets = nonholo::seed_all(x);
    const auto d = nonholo::derivatives_of(t.eval(t.root, jets), nvars);
    auto fv = [&](const std::vector<double>& p) { return t.eval(t.root, p); };
    const auto g_fd = oracle::fd_gradient(fv, x, 1e-5);
    for (int i = 0; i < nvars; ++i) {
      EXPECT_LE(std::abs(g_fd(i) - d.gradient(i)), 1e-6 * std::max(1.0, std::abs(d.gradient(i)))) << "tree " << k;
    }
    // Hessian columns by differencing the AD gradient.
    auto grad_ad = [&](const std::vector<double>& p) {
      return nonholo::derivatives_of(t.eval(t.root, nonholo::seed_all(p)), nvars).gradient;
    };
    const auto H_fd = oracle::fd_jacobian(grad_ad, x, 1e-5);
    for (int i = 0; i < nvars; ++i) {
      for (int j = 0; j < nvars; ++j) {
        EXPECT_LE(std::abs(H_fd(i, j) - d.hessian(i, j)), 1e-6 * std::max(1.0, std::abs(d.hessian(i, j))))
            << "tree " << k;
        EXPECT_EQ(d.hessian(i, j), d.hessian(j, i)) << "tree " << k;
      }
    }
  }
}
