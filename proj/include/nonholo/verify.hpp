#pragma once

// Global invariant suites run by `nonholo verify`: the off-shell identity,
// AD against finite differences, the Chetaev identity and agreement of the
// two residual forms. All sampling is seeded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/dynamics.hpp"
#include "nonholo/implicit.hpp"
#include "nonholo/model.hpp"
#include "nonholo/scenarios.hpp"

namespace nonholo {

inline constexpr std::uint64_t kDefaultSeed = 20240611;

struct SuiteResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::size_t tested = 0;
  std::size_t skipped = 0;
};

namespace detail {

inline double rel_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({1.0, a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>()});
  return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace detail

/// States near the scenario's initial state: positions shifted, transverse
/// velocities rescaled by at most 10 %, time in the first 5 % of the horizon.
inline TransState random_state_near(const Scenario& sc, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  TransState s = sc.initial;
  for (Eigen::Index i = 0; i < s.x_leaf.size(); ++i) s.x_leaf(i) += 0.3 * U(rng);
  for (Eigen::Index i = 0; i < s.x_trans.size(); ++i) s.x_trans(i) += 0.3 * U(rng);
  for (Eigen::Index i = 0; i < s.y_trans.size(); ++i) s.y_trans(i) *= 1.0 + 0.1 * U(rng);
  s.t = sc.t0 + 0.05 * (sc.t1 - sc.t0) * 0.5 * (1.0 + U(rng));
  return s;
}

inline Eigen::VectorXd random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = U(rng);
  return v;
}

/// residual_eqlagc(j) = -h a + F - p_leaf K at random jets.
inline SuiteResult offshell_suite(const Scenario& sc, std::size_t count, std::uint64_t seed, double tol = 1e-9) {
  SuiteResult r{"off-shell identity", false, 0.0, tol};
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const auto s = random_state_near(sc, rng);
    const auto a = random_vector(sc.dims.n, rng);
    try {
      const auto an = analyze(sc.L, sc.C, s, sc.options.cond_limit);
      r.measured = std::max(r.measured, detail::rel_gap(residual_eqlagc(an.pe, a), offshell_rhs(an, a)));
      ++r.tested;
    } catch (const Error&) {
      ++r.skipped;
    }
  }
  r.passed = r.tested > 0 && r.measured <= tol;
  return r;
}

/// residual_theorem_form = residual_eqlagc at a = S.
inline SuiteResult theorem_form_suite(const Scenario& sc, std::size_t count, std::uint64_t seed, double tol = 1e-9) {
  SuiteResult r{"theorem form on shell", false, 0.0, tol};
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const auto s = random_state_near(sc, rng);
    try {
      const auto an = analyze(sc.L, sc.C, s, sc.options.cond_limit);
      const Eigen::VectorXd r1 = residual_eqlagc(an.pe, an.S);
      const Eigen::VectorXd r2 = residual_theorem_form(an, an.S);
      const double scale = std::max(1.0, an.F.lpNorm<Eigen::Infinity>());
      r.measured = std::max(r.measured, std::max(r1.lpNorm<Eigen::Infinity>(), (r1 - r2).lpNorm<Eigen::Infinity>()) / scale);
      ++r.tested;
    } catch (const Error&) {
      ++r.skipped;
    }
  }
  r.passed = r.tested > 0 && r.measured <= tol;
  return r;
}

namespace detail {

// Compares AD value/gradient/Hessian of f against central differences with
// step h: gradients from values, Hessians from differences of AD gradients.
template <typename F>
double ad_fd_gap(const F& f, const std::vector<double>& x, double h) {
  const std::size_t N = x.size();
  const auto at = [&](const std::vector<double>& p) { return derivatives_of(f(seed_all(p)), N); };
  const auto base = at(x);
  double worst = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const auto dp = at(xp), dm = at(xm);
    const double g_fd = (dp.value - dm.value) / (2.0 * h);
    const double g_ad = base.gradient(static_cast<Eigen::Index>(i));
    worst = std::max(worst, std::abs(g_fd - g_ad) / std::max({1.0, std::abs(g_ad), std::abs(g_fd)}));
    const Eigen::VectorXd col = (dp.gradient - dm.gradient) / (2.0 * h);
    for (std::size_t j = 0; j < N; ++j) {
      const double h_ad = base.hessian(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      const double h_fd = col(static_cast<Eigen::Index>(j));
      worst = std::max(worst, std::abs(h_fd - h_ad) / std::max({1.0, std::abs(h_ad), std::abs(h_fd)}));
    }
  }
  return worst;
}

}  // namespace detail

/// L over w and every component of C over z against central differences.
inline SuiteResult ad_fd_suite(const Scenario& sc, std::size_t count, std::uint64_t seed, double h = 1e-5,
                               double tol = 1e-6) {
  SuiteResult r{"AD vs finite differences", false, 0.0, tol};
  std::mt19937_64 rng(seed);
  const auto& d = sc.dims;
  for (std::size_t k = 0; k < count; ++k) {
    const auto s = random_state_near(sc, rng);
    try {
      const Eigen::VectorXd y_leaf = sc.C(s);
      const auto w = w_values(d, s, y_leaf);
      r.measured = std::max(r.measured, detail::ad_fd_gap([&](ADSpan p) { return sc.L.f(p); }, w, h));
      const auto z = z_values(d, s);
      for (std::size_t u = 0; u < d.m; ++u) {
        r.measured = std::max(r.measured, detail::ad_fd_gap([&](ADSpan p) { return sc.C.eval(p)[u]; }, z, h));
      }
      ++r.tested;
    } catch (const Error&) {
      ++r.skipped;
    }
  }
  r.passed = r.tested > 0 && r.measured <= tol;
  return r;
}

/// For E = lambda . dG/dy, E_trans + C_y^T E_leaf = 0. Explicit constraints
/// use G = y_leaf - C.
inline SuiteResult chetaev_suite(const Scenario& sc, std::size_t count, std::uint64_t seed, double tol = 1e-12) {
  SuiteResult r{"Chetaev identity", false, 0.0, tol};
  std::mt19937_64 rng(seed);
  const auto& d = sc.dims;
  for (std::size_t k = 0; k < count; ++k) {
    const auto s = random_state_near(sc, rng);
    const auto lambda = random_vector(d.m, rng);
    try {
      Eigen::MatrixXd Gl, Gt;
      if (sc.implicit) {
        const auto g = constraint_gradients(*sc.implicit, s);
        Gl = g.dG_dyleaf;
        Gt = g.dG_dytrans;
      } else {
        const auto pe = evaluate_point(sc.L, sc.C, s);
        Gl = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d.m), static_cast<Eigen::Index>(d.m));
        Gt = -pe.C_y();
      }
      const Eigen::VectorXd E_leaf = Gl.transpose() * lambda;
      const Eigen::VectorXd E_trans = Gt.transpose() * lambda;
      const double scale = std::max({1.0, E_leaf.lpNorm<Eigen::Infinity>(), E_trans.lpNorm<Eigen::Infinity>()});
      r.measured = std::max(r.measured, chetaev_residual(sc.C, E_leaf, E_trans, s).lpNorm<Eigen::Infinity>() / scale);
      ++r.tested;
    } catch (const Error&) {
      ++r.skipped;
    }
  }
  r.passed = r.tested > 0 && r.measured <= tol;
  return r;
}

inline std::vector<SuiteResult> global_suites(const Scenario& sc, std::uint64_t seed = kDefaultSeed) {
  return {offshell_suite(sc, 200, seed), theorem_form_suite(sc, 50, seed + 1), ad_fd_suite(sc, 20, seed + 2),
          chetaev_suite(sc, 100, seed + 3)};
}

}  // namespace nonholo
