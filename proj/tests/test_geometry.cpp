#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace nonholo;
using th::state;
using th::vec;

namespace {

ConstraintMap appell_linear(double R = 2.0, double r = 1.0) {
  return th::linear({"R*cos(xb2)", "0", "R*sin(xb2)", "0", "r", "0"}, {3, 2}, {{"R", R}, {"r", r}});
}

ConstraintMap random_linear_m2n3() {
  return th::linear({"sin(xb2) + x1*xb3", "0.3*x2", "cos(xb1*x2)", "xb1^2", "exp(0.2*x1)*xb3", "0.5*sin(x2+xb2)"},
                    {2, 3});
}

AdaptedDiffeo nonlinear_diffeo() {
  AdaptedDiffeo f;
  f.leaf = th::parse_all({"x1*exp(0.2*xb1) + 0.5*sin(xb2)"});
  f.trans = th::parse_all({"xb1 + 0.3*xb2^2", "exp(0.5*xb2)"});
  f.trans_inverse = th::parse_all({"xb1 - 0.3*(2*log(xb2))^2", "2*log(xb2)"});
  // leaf_inverse may use the primed transverse coordinates, recovered inline.
  f.leaf_inverse = th::parse_all({"(x1 - 0.5*sin(2*log(xb2)))*exp(-0.2*(xb1 - 0.3*(2*log(xb2))^2))"});
  return f;
}

AdaptedDiffeo identity_diffeo() {
  AdaptedDiffeo f;
  f.leaf = f.leaf_inverse = th::parse_all({"x1"});
  f.trans = f.trans_inverse = th::parse_all({"xb1", "xb2"});
  return f;
}

AdaptedDiffeo linear_diffeo() {
  AdaptedDiffeo f;
  f.leaf = th::parse_all({"2*x1 + xb1 - xb2"});
  f.trans = th::parse_all({"xb1 + 2*xb2", "3*xb2"});
  f.trans_inverse = th::parse_all({"xb1 - 2*xb2/3", "xb2/3"});
  f.leaf_inverse = th::parse_all({"(x1 - (xb1 - 2*xb2/3) + xb2/3)/2"});
  return f;
}

TransState random_state(ChartDims d, std::mt19937_64& rng, double spread = 1.0) {
  std::uniform_real_distribution<double> U(-spread, spread);
  TransState s;
  s.x_leaf.resize(oracle::ix(d.m));
  s.x_trans.resize(oracle::ix(d.n));
  s.y_trans.resize(oracle::ix(d.n));
  for (auto* v : {&s.x_leaf, &s.x_trans, &s.y_trans}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = U(rng);
  }
  s.t = 0.0;
  return s;
}

}  // namespace

TEST(Geometry, AppellCurvatureAtTwoAngles) {
  const auto C = appell_linear();
  const auto B0 = curvature_B(C, state({0, 0, 0}, {0, 0}, {0.3, 0.1}));
  EXPECT_NEAR(B0[0](0, 1), 0.0, 1e-12);
  EXPECT_NEAR(B0[1](0, 1), 2.0, 1e-12);
  EXPECT_NEAR(B0[2](0, 1), 0.0, 1e-12);
  const auto B1 = curvature_B(C, state({0, 0, 0}, {0, std::numbers::pi / 2}, {0.3, 0.1}));
  EXPECT_NEAR(B1[0](0, 1), -2.0, 1e-12);
  EXPECT_NEAR(B1[1](0, 1), 0.0, 1e-12);
  EXPECT_NEAR(B1[2](0, 1), 0.0, 1e-12);
  EXPECT_NEAR(B1[0](1, 0), 2.0, 1e-12);
}

TEST(Geometry, CurvatureIsExactlyAntisymmetric) {
  const auto C = random_linear_m2n3();
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const auto B = curvature_B(C, random_state(C.dims, rng));
    for (const auto& M : B) {
      EXPECT_EQ((M + M.transpose()).norm(), 0.0);
    }
  }
}

TEST(Geometry, CurvatureMatchesBracketOracleForLinearConstraints) {
  // For a linear constraint the bracket oracle gives K = B.y; probing with
  // unit velocities e_b extracts column b of B^u.
  const auto C = random_linear_m2n3();
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    auto s = random_state(C.dims, rng);
    const auto B = curvature_B(C, s);
    for (std::size_t b = 0; b < 3; ++b) {
      s.y_trans.setZero();
      s.y_trans(oracle::ix(b)) = 1.0;
      const auto Kb = oracle::pseudo_curvature_bracket(C, s);
      for (std::size_t u = 0; u < 2; ++u) {
        for (std::size_t a = 0; a < 3; ++a) {
          EXPECT_NEAR(B[u](oracle::ix(a), oracle::ix(b)), Kb(oracle::ix(u), oracle::ix(a)), 1e-9);
        }
      }
    }
  }
}

TEST(Geometry, PseudoCurvatureOfLinearConstraintIsVelocityContraction) {
  const auto C = random_linear_m2n3();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto s = random_state(C.dims, rng);
    const auto B = curvature_B(C, s);
    const auto K = pseudo_curvature_K(C, s);
    for (std::size_t u = 0; u < 2; ++u) {
      const Eigen::VectorXd yB = B[u] * s.y_trans;
      EXPECT_LE(oracle::rel_err(Eigen::VectorXd(K.row(oracle::ix(u)).transpose()), yB), 1e-10);
    }
  }
}

TEST(Geometry, AffinePseudoCurvatureAddsGamma) {
  const auto C = th::affine({"sin(xb2)", "x1*xb1", "0.5*cos(x1)"}, {"xb1*xb2 + 0.3*x1^2"}, {1, 3});
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    const auto s = random_state(C.dims, rng);
    const auto B = curvature_B(C, s);
    const auto g = gamma_affine(C, s);
    const auto K = pseudo_curvature_K(C, s);
    const Eigen::VectorXd expected = B[0] * s.y_trans + g.row(0).transpose();
    EXPECT_LE(oracle::rel_err(Eigen::VectorXd(K.row(0).transpose()), expected), 1e-10);
    EXPECT_LE(oracle::rel_err(K, oracle::pseudo_curvature_bracket(C, s)), 1e-8);
  }
}

TEST(Geometry, GammaExamples) {
  // b = xb1 with no velocity part: gamma = -db/dxb = -1.
  EXPECT_DOUBLE_EQ(gamma_affine(th::affine({"0"}, {"xb1"}, {1, 1}), state({0.4}, {0.7}, {0}))(0, 0), -1.0);
  // b = x1 with C_1 = 1: gamma = -C_1 db/dx1 = -1.
  EXPECT_DOUBLE_EQ(gamma_affine(th::affine({"1"}, {"x1"}, {1, 1}), state({0.4}, {0.7}, {0}))(0, 0), -1.0);
  // b = 2 with C_1 = x1: gamma = b dC_1/dx1 = 2.
  EXPECT_DOUBLE_EQ(gamma_affine(th::affine({"x1"}, {"2"}, {1, 1}), state({0.4}, {0.7}, {0}))(0, 0), 2.0);
  // Pure linear: gamma identically zero.
  const auto zero_b = th::affine({"sin(xb1)"}, {"0"}, {1, 1});
  EXPECT_EQ(gamma_affine(zero_b, state({0.4}, {0.7}, {0}))(0, 0), 0.0);
}

TEST(Geometry, KindRestrictions) {
  const auto nl = th::con({"sqrt(yb1^2+yb2^2)"}, {1, 2});
  EXPECT_THROW(curvature_B(nl, state({0}, {0, 0}, {1, 0})), WrongKind);
  EXPECT_THROW(gamma_affine(appell_linear(), state({0, 0, 0}, {0, 0}, {1, 0})), WrongKind);
  const auto g = geometry_pack(appell_linear(), vec({0.1, 0.2}), state({0, 0, 0}, {0, 0.2}, {1, 0}));
  EXPECT_TRUE(g.B.has_value());
  EXPECT_FALSE(g.gamma.has_value());
}

TEST(Geometry, AppellNonlinearityTensor) {
  const auto C = th::con({"alpha*sqrt(yb1^2+yb2^2)"}, {1, 2}, {{"alpha", 1.0}});
  const auto T = nonlinearity_tensor(C, state({0}, {0, 0}, {1, 0}));
  EXPECT_NEAR(T[0](0, 0), 0.0, 1e-15);
  EXPECT_NEAR(T[0](0, 1), 0.0, 1e-15);
  EXPECT_NEAR(T[0](1, 1), 1.0, 1e-15);
  // Independent check: d2|y|/dy2 = (I - yy^T/|y|^2)/|y| at a generic point.
  const auto y = vec({0.3, -1.1});
  const auto Tg = nonlinearity_tensor(C, state({0}, {0, 0}, {0.3, -1.1}));
  const Eigen::MatrixXd expected = (Eigen::MatrixXd::Identity(2, 2) - y * y.transpose() / y.squaredNorm()) / y.norm();
  EXPECT_LE(oracle::rel_err(Tg[0], expected), 1e-14);
}

TEST(Geometry, MarleNonlinearityTensorIsTwiceK2) {
  for (double k2 : {0.5, -1.25, 3.0}) {
    const auto sc = build("marle", {{"k2", k2}});
    std::mt19937_64 rng(5);
    for (int k = 0; k < 10; ++k) {
      const auto T = nonlinearity_tensor(sc.C, random_state(sc.dims, rng));
      EXPECT_NEAR(T[0](0, 0), 2.0 * k2, 1e-12);
    }
  }
}

TEST(Geometry, PseudoCurvatureMatchesBracketOracle) {
  for (auto& sys : oracle::random_systems(6)) {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 10; ++k) {
      const auto s = sys.sample(rng);
      EXPECT_LE(oracle::rel_err(pseudo_curvature_K(sys.C, s), oracle::pseudo_curvature_bracket(sys.C, s)), 1e-8)
          << sys.name;
    }
  }
  std::mt19937_64 rng(8);
  for (const auto& name : builtin_names()) {
    const auto sc = build(name);
    for (int k = 0; k < 5; ++k) {
      const auto s = random_state_near(sc, rng);
      EXPECT_LE(oracle::rel_err(pseudo_curvature_K(sc.C, s), oracle::pseudo_curvature_bracket(sc.C, s)), 1e-8) << name;
    }
  }
}

TEST(Geometry, SCurvatureEqualsPseudoCurvatureForLinearConstraints) {
  const auto C = random_linear_m2n3();
  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    const auto s = random_state(C.dims, rng);
    const Eigen::VectorXd S = random_state(C.dims, rng).y_trans * 10.0;
    EXPECT_EQ(s_curvature(C, S, s), pseudo_curvature_K(C, s));
  }
}

TEST(Geometry, SCurvatureAddsNonlinearityAlongSemispray) {
  const auto C = th::con({"alpha*sqrt(yb1^2+yb2^2)"}, {1, 2}, {{"alpha", 1.0}});
  const auto s = state({0}, {0, 0}, {1, 0});
  const auto R = s_curvature(C, vec({0.0, 3.0}), s);
  const auto K = pseudo_curvature_K(C, s);
  EXPECT_NEAR(R(0, 0) - K(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(R(0, 1) - K(0, 1), 3.0, 1e-14);
  EXPECT_THROW(s_curvature(C, vec({1.0}), s), InvalidArgument);
}

TEST(Geometry, ChartChangeIdentity) {
  const auto sc = build("appell_nonlinear");
  const auto s = sc.initial;
  const auto an = analyze(sc.L, sc.C, s);
  const auto rep = chart_transform_check(sc.C, identity_diffeo(), an.S, s);
  EXPECT_LE(rep.R_deviation, 1e-14);
  EXPECT_LE(rep.K_deviation, 1e-14);
  EXPECT_LE(oracle::rel_err(rep.new_semispray, an.S), 1e-15);
}

TEST(Geometry, ChartChangeLinearAndNonlinear) {
  std::vector<oracle::System> systems;
  for (auto& sys : oracle::random_systems(10)) {
    if (sys.dims == ChartDims{1, 2}) systems.push_back(sys);
  }
  ASSERT_FALSE(systems.empty());
  const auto appell = build("appell_nonlinear", {{"delta", 0.7}});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  // K alone transforms as a tensor only when the transverse map is affine;
  // for a curved transverse map the second derivatives of B enter through
  // the semispray, and only R = K + Ctensor.S absorbs them.
  double worst_K_nonlinear = 0.0;
  for (const bool affine_trans : {true, false}) {
    const auto f = affine_trans ? linear_diffeo() : nonlinear_diffeo();
    for (int k = 0; k < 20; ++k) {
      const auto& sys = systems[static_cast<std::size_t>(k) % systems.size()];
      const auto s = sys.sample(rng);
      const auto S = analyze(sys.L, sys.C, s).S;
      const auto rep = chart_transform_check(sys.C, f, S, s);
      EXPECT_LE(rep.R_deviation, 1e-10 * std::max(1.0, rep.R_expected.lpNorm<Eigen::Infinity>())) << sys.name;
      if (affine_trans) {
        EXPECT_LE(rep.K_deviation, 1e-10 * std::max(1.0, rep.K_expected.lpNorm<Eigen::Infinity>())) << sys.name;
      } else {
        worst_K_nonlinear = std::max(worst_K_nonlinear, rep.K_deviation);
      }

      auto sa = random_state_near(appell, rng);
      const auto Sa = analyze(appell.L, appell.C, sa).S;
      const auto ra = chart_transform_check(appell.C, f, Sa, sa);
      EXPECT_LE(ra.R_deviation, 1e-10 * std::max(1.0, ra.R_expected.lpNorm<Eigen::Infinity>()));
    }
  }
  EXPECT_GT(worst_K_nonlinear, 1e-3);
}

TEST(Geometry, BrokenInverseIsRejected) {
  auto f = nonlinear_diffeo();
  f.trans_inverse = th::parse_all({"xb1", "2*log(xb2)"});
  const auto C = th::con({"sqrt(yb1^2+yb2^2)"}, {1, 2});
  EXPECT_THROW(chart_transform_check(C, f, vec({0, 0}), state({0.1}, {0.4, 0.5}, {1, 0.5})), ChartError);
  auto g = nonlinear_diffeo();
  g.leaf.clear();
  EXPECT_THROW(transform_constraint(C, g), ChartError);
}
