#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace nonholo;
using th::state;
using th::vec;

namespace {

ImplicitConstraint implicit(const std::vector<std::string>& G, const std::vector<std::string>& branch, ChartDims d,
                            const th::Params& p = {}, ImplicitKind kind = ImplicitKind::Con) {
  return implicit_from_exprs(th::parse_all(G), th::parse_all(branch), d, p, kind);
}

const th::Params kAppell{{"alpha", 1.0}};

ImplicitConstraint appell_implicit(const std::string& branch = "alpha*(abs(yb1)+abs(yb2))") {
  return implicit({"alpha^2*(yb1^2+yb2^2) - y1^2"}, {branch}, {1, 2}, kAppell);
}

}  // namespace

TEST(Implicit, AppellBranchesFollowTheHint) {
  const auto s = state({0}, {0, 0}, {3, 4});
  const auto pos = solve(appell_implicit(), s);
  EXPECT_NEAR(pos.y_leaf(0), 5.0, 1e-12);
  const auto neg = solve(appell_implicit("-alpha*(abs(yb1)+abs(yb2))"), s);
  EXPECT_NEAR(neg.y_leaf(0), -5.0, 1e-12);
}

TEST(Implicit, ConeVertexIsSingular) {
  const auto s = state({0}, {0, 0}, {0, 0});
  EXPECT_THROW(solve(appell_implicit(), s), SingularJacobian);
  try {
    solve(appell_implicit(), s);
  } catch (const SingularJacobian& e) {
    EXPECT_FALSE(e.cond() <= 1e12);
  }
}

TEST(Implicit, CyclingNewtonReportsNoConvergence) {
  const auto ic = implicit({"y1^3 - 2*y1 + 2"}, {"0"}, {1, 1});
  EXPECT_THROW(solve(ic, state({0}, {0}, {0})), NoConvergence);
}

TEST(Implicit, ValuesAndDerivativesMatchExplicitAppell) {
  const auto C_imp = as_constraint_map(appell_implicit());
  const auto C_exp = th::con({"alpha*sqrt(yb1^2+yb2^2)"}, {1, 2}, kAppell);
  EXPECT_EQ(C_imp.kind, ConstraintKind::ImplicitCon);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int k = 0; k < 100; ++k) {
    const TransState s{vec({U(rng)}), vec({U(rng), U(rng)}), vec({U(rng), U(rng)}), 0.0};
    if (s.y_trans.norm() < 0.1) continue;
    const auto a = constraint_derivatives(C_imp, s);
    const auto b = constraint_derivatives(C_exp, s);
    EXPECT_LE(oracle::rel_err(a.value, b.value), 1e-8);
    EXPECT_LE(oracle::rel_err(a.jac, b.jac), 1e-8);
    EXPECT_LE(oracle::rel_err(a.hess[0], b.hess[0]), 1e-8);
  }
}

TEST(Implicit, ValuesAndDerivativesMatchExplicitBenenti) {
  const auto C_imp = as_constraint_map(implicit({"y1*yb3 - yb1*yb2"}, {"0"}, {1, 3}));
  const auto C_exp = th::con({"yb1*yb2/yb3"}, {1, 3});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int k = 0; k < 100; ++k) {
    TransState s{vec({U(rng)}), vec({U(rng), U(rng), U(rng)}), vec({U(rng), U(rng), U(rng)}), 0.0};
    if (std::abs(s.y_trans(2)) < 0.2) s.y_trans(2) = 0.7;
    const auto a = constraint_derivatives(C_imp, s);
    const auto b = constraint_derivatives(C_exp, s);
    EXPECT_LE(oracle::rel_err(a.value, b.value), 1e-8);
    EXPECT_LE(oracle::rel_err(a.jac, b.jac), 1e-8);
    EXPECT_LE(oracle::rel_err(a.hess[0], b.hess[0]), 1e-8);
  }
}

TEST(Implicit, CoupledSystemDerivativesMatchFiniteDifferences) {
  // Two leaf velocities tied together nonlinearly; no closed form exists.
  const auto ic = implicit({"y1 + 0.2*y1^3 + 0.1*y1*y2 - yb1*cos(xb1) - 0.3*t*yb2", "y2 + 0.1*sin(y2) - y1*yb2 - x1*yb1^2"},
                           {"yb1", "0"}, {2, 2});
  const auto C = as_constraint_map(ic);
  const auto s = state({0.3, -0.2}, {0.4, 0.1}, {0.8, -0.5}, 0.7);
  const auto cd = constraint_derivatives(C, s);
  const auto z = z_values(C.dims, s);
  for (std::size_t u = 0; u < 2; ++u) {
    auto fu = [&](const std::vector<double>& p) { return oracle::c_value(C, p)(oracle::ix(u)); };
    const auto g = oracle::fd_gradient(fu, z, 1e-6);
    EXPECT_LE(oracle::rel_err(g, Eigen::VectorXd(cd.jac.row(oracle::ix(u)).transpose())), 1e-8);
    auto grad_u = [&](const std::vector<double>& p) {
      return oracle::ad_gradient([&](ADSpan q) { return C.eval(q)[u]; }, p);
    };
    const auto H = oracle::fd_jacobian(grad_u, z, 1e-6);
    EXPECT_LE(oracle::rel_err(H, cd.hess[u]), 1e-7);
  }
  EXPECT_TRUE(C.time_dependent);
}

TEST(Implicit, NewtonConvergesQuicklyFromNearbyHint) {
  auto ic = appell_implicit();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int k = 0; k < 50; ++k) {
    const auto s = state({U(rng)}, {U(rng), U(rng)}, {U(rng), U(rng)});
    if (s.y_trans.norm() < 0.1) continue;
    const double exact = s.y_trans.norm();
    ic.branch_hint = [exact](const std::vector<double>&) { return vec({1.1 * exact}); };
    const auto sol = solve(ic, s);
    EXPECT_LE(sol.iterations, 8);
    EXPECT_NEAR(sol.y_leaf(0), exact, 1e-12 * std::max(1.0, exact));
  }
}

TEST(Implicit, LinearImplicitRecoversLinearLift) {
  const th::Params p{{"R", 2.0}, {"r", 1.0}};
  const auto ic = implicit({"y1 - R*cos(xb2)*yb1", "y2 - R*sin(xb2)*yb1", "y3 - r*yb1"}, {"0", "0", "0"}, {3, 2}, p);
  const auto C_imp = as_constraint_map(ic);
  const auto C_lin = th::linear({"R*cos(xb2)", "0", "R*sin(xb2)", "0", "r", "0"}, {3, 2}, p);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int k = 0; k < 50; ++k) {
    const auto s = state({U(rng), U(rng), U(rng)}, {U(rng), U(rng)}, {U(rng), U(rng)});
    EXPECT_LE(oracle::rel_err(C_imp(s), C_lin(s)), 1e-14);
  }
}

TEST(Implicit, ChetaevIdentityForBothKinds) {
  for (auto kind : {ImplicitKind::Con, ImplicitKind::Cov}) {
    const auto ic = implicit({"alpha^2*(yb1^2+yb2^2) - y1^2"}, {"alpha*(abs(yb1)+abs(yb2))"}, {1, 2}, kAppell, kind);
    const auto C = as_constraint_map(ic);
    EXPECT_EQ(C.kind, kind == ImplicitKind::Con ? ConstraintKind::ImplicitCon : ConstraintKind::ImplicitCov);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2, 2);
    for (int k = 0; k < 50; ++k) {
      const auto s = state({U(rng)}, {U(rng), U(rng)}, {U(rng), U(rng)});
      if (s.y_trans.norm() < 0.1) continue;
      const double lambda = U(rng);
      const auto g = constraint_gradients(ic, s);
      const Eigen::VectorXd E_leaf = lambda * g.dG_dyleaf.row(0).transpose();
      const Eigen::VectorXd E_trans = lambda * g.dG_dytrans.row(0).transpose();
      EXPECT_LE(chetaev_residual(C, E_leaf, E_trans, s).lpNorm<Eigen::Infinity>(), 1e-12 * std::max(1.0, E_leaf.norm()));
    }
  }
}

TEST(Implicit, ChetaevResidualWithZeroLeafPartIsTransversePart) {
  const auto C = th::con({"yb1*yb2/yb3"}, {1, 3});
  const auto s = state({0}, {0, 0, 0}, {1, 2, 3});
  const auto x = vec({0.5, -1.5, 2.0});
  EXPECT_EQ(chetaev_residual(C, vec({0.0}), x, s), x);
  EXPECT_THROW(chetaev_residual(C, vec({0.0, 1.0}), x, s), InvalidArgument);
}

TEST(Implicit, ConfigurationErrors) {
  EXPECT_THROW(implicit({"y1"}, {"0", "0"}, {1, 2}), ConfigError);
  EXPECT_THROW(implicit({"y1", "y2"}, {"0", "0"}, {1, 2}), ConfigError);
}
