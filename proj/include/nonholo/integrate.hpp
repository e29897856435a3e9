#pragma once

// Fixed-step RK4 on the transverse phase space. The integrated state is
// (x_leaf, x_trans, y_trans[, t]); leaf velocities are always reconstructed
// through C and never integrated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonholo/dynamics.hpp"
#include "nonholo/errors.hpp"
#include "nonholo/model.hpp"

namespace nonholo {

/// Aborts integration when value(state) < min.
struct Guard {
  std::string name;
  std::function<double(const TransState&)> value;
  double min = 0.0;
};

struct SimulationOptions {
  double cond_limit = kDefaultCondLimit;
  std::vector<Guard> guards;
};

struct Sample {
  double t = 0.0;
  TransState state;
  Eigen::VectorXd y_leaf;
  Eigen::VectorXd S;
  /// max |residual_eqlagc| with a = S at this sample.
  double residual = 0.0;
};

struct Trajectory {
  ChartDims dims;
  double dt = 0.0;
  bool time_dependent = false;
  std::vector<Sample> samples;
};

enum class StopReason { Completed, Degenerate, Singularity, NonFinite, NewtonFailure };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::Completed: return "completed";
    case StopReason::Degenerate: return "degenerate";
    case StopReason::Singularity: return "singularity";
    case StopReason::NonFinite: return "non-finite";
    case StopReason::NewtonFailure: return "newton-failure";
  }
  return "?";
}

struct SimulationResult {
  Trajectory trajectory;
  StopReason stop = StopReason::Completed;
  std::string message;
  bool ok() const { return stop == StopReason::Completed; }
};

namespace detail {

inline void check_guards(const SimulationOptions& opt, const TransState& s) {
  if (!s.x_leaf.allFinite() || !s.x_trans.allFinite() || !s.y_trans.allFinite()) {
    throw NonFinite("state became non-finite");
  }
  for (const auto& g : opt.guards) {
    const double v = g.value(s);
    if (!(v >= g.min)) {
      throw SingularityReached("guard '" + g.name + "' tripped: value " + format_double(v) + " < " +
                               format_double(g.min));
    }
  }
}

inline Eigen::VectorXd pack(const ChartDims& d, const TransState& s, bool td) {
  Eigen::VectorXd v(ix(d.m + 2 * d.n + (td ? 1 : 0)));
  v.head(ix(d.m + 2 * d.n)) << s.x_leaf, s.x_trans, s.y_trans;
  if (td) v(v.size() - 1) = s.time();
  return v;
}

inline TransState unpack(const ChartDims& d, const Eigen::VectorXd& v, bool td) {
  TransState s;
  s.x_leaf = v.segment(0, ix(d.m));
  s.x_trans = v.segment(ix(d.m), ix(d.n));
  s.y_trans = v.segment(ix(d.m + d.n), ix(d.n));
  if (td) s.t = v(v.size() - 1);
  return s;
}

inline Eigen::VectorXd field_from(const Analysis& an, bool td) {
  const auto& d = an.pe.dims;
  Eigen::VectorXd f(ix(d.m + 2 * d.n + (td ? 1 : 0)));
  f.head(ix(d.m + 2 * d.n)) << an.pe.C.value, an.pe.state.y_trans, an.S;
  if (td) f(f.size() - 1) = 1.0;
  return f;
}

}  // namespace detail

inline bool is_time_dependent(const LagrangianField& L, const ConstraintMap& C) {
  return L.time_dependent || C.time_dependent;
}

/// (dx_leaf, dx_trans, dy_trans[, dt]) = (C(s), y_trans, S(s)[, 1]).
inline Eigen::VectorXd vector_field(const LagrangianField& L, const ConstraintMap& C, const TransState& s,
                                    const SimulationOptions& opt = {}) {
  detail::check_guards(opt, s);
  const auto an = analyze(L, C, s, opt.cond_limit);
  if (!an.S.allFinite()) throw NonFinite("semispray is not finite");
  return detail::field_from(an, is_time_dependent(L, C));
}

/// Number of constant steps covering [t0, t_end].
inline long step_count(double t0, double t_end, double dt) {
  const double n = (t_end - t0) / dt;
  const double r = std::round(n);
  if (std::abs(n - r) <= 1e-9 * std::max(1.0, r)) return static_cast<long>(r);
  return static_cast<long>(std::ceil(n));
}

inline SimulationResult simulate(const LagrangianField& L, const ConstraintMap& C, const TransState& init,
                                 double t_end, double dt, const SimulationOptions& opt = {}) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  check_compatible(L, C);
  const auto& d = C.dims;
  init.check(d);
  const bool td = is_time_dependent(L, C);
  const double t0 = init.time();
  if (!(t_end > t0)) throw InvalidArgument("t_end must exceed the initial time");
  const long steps = step_count(t0, t_end, dt);

  SimulationResult res;
  res.trajectory.dims = d;
  res.trajectory.dt = dt;
  res.trajectory.time_dependent = td;
  res.trajectory.samples.reserve(static_cast<std::size_t>(steps) + 1);

  TransState s = init;
  if (td) s.t = t0;
  try {
    for (long k = 0;; ++k) {
      const double t = t0 + static_cast<double>(k) * dt;
      if (td) s.t = t;
      detail::check_guards(opt, s);
      const auto an = analyze(L, C, s, opt.cond_limit);
      if (!an.S.allFinite()) throw NonFinite("semispray is not finite");
      Sample smp;
      smp.t = t;
      smp.state = s;
      smp.y_leaf = an.pe.C.value;
      smp.S = an.S;
      smp.residual = residual_eqlagc(an.pe, an.S).lpNorm<Eigen::Infinity>();
      res.trajectory.samples.push_back(std::move(smp));
      if (k == steps) break;

      const Eigen::VectorXd y0 = detail::pack(d, s, td);
      auto f = [&](const Eigen::VectorXd& y) { return vector_field(L, C, detail::unpack(d, y, td), opt); };
      const Eigen::VectorXd k1 = detail::field_from(an, td);
      const Eigen::VectorXd k2 = f(y0 + 0.5 * dt * k1);
      const Eigen::VectorXd k3 = f(y0 + 0.5 * dt * k2);
      const Eigen::VectorXd k4 = f(y0 + dt * k3);
      const Eigen::VectorXd y1 = y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      s = detail::unpack(d, y1, td);
    }
  } catch (const Degenerate& e) {
    res.stop = StopReason::Degenerate;
    res.message = e.what();
  } catch (const SingularityReached& e) {
    res.stop = StopReason::Singularity;
    res.message = e.what();
  } catch (const DomainError& e) {
    res.stop = StopReason::Singularity;
    res.message = std::string("left the domain of L or C: ") + e.what();
  } catch (const NonFinite& e) {
    res.stop = StopReason::NonFinite;
    res.message = e.what();
  } catch (const SingularJacobian& e) {
    res.stop = StopReason::NewtonFailure;
    res.message = e.what();
  } catch (const NoConvergence& e) {
    res.stop = StopReason::NewtonFailure;
    res.message = e.what();
  }
  return res;
}

struct MonitorReport {
  double max_eqlagc = 0.0;
  double max_theorem = 0.0;
  /// max over samples of |eqlagc - theorem form|
  double max_form_gap = 0.0;
  std::vector<double> eqlagc;
  std::vector<double> theorem;
};

namespace detail {

// Second-order differences: central inside, one-sided at the ends.
inline std::vector<Eigen::VectorXd> time_derivative(const std::vector<Eigen::VectorXd>& f, double dt) {
  const std::size_t N = f.size();
  std::vector<Eigen::VectorXd> df(N);
  for (std::size_t k = 0; k < N; ++k) {
    if (k == 0) {
      df[k] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
    } else if (k + 1 == N) {
      df[k] = (3.0 * f[N - 1] - 4.0 * f[N - 2] + f[N - 3]) / (2.0 * dt);
    } else {
      df[k] = (f[k + 1] - f[k - 1]) / (2.0 * dt);
    }
  }
  return df;
}

}  // namespace detail

/// Reconstructs the time derivatives along a recorded trajectory by finite
/// differences and evaluates both residual forms at every sample.
inline MonitorReport monitor(const Trajectory& traj, const LagrangianField& L, const ConstraintMap& C,
                             double cond_limit = kDefaultCondLimit) {
  using detail::ix;
  const auto& samples = traj.samples;
  if (samples.size() < 3) throw InvalidArgument("monitor needs at least three samples");
  const auto& d = traj.dims;
  const std::size_t N = samples.size();

  std::vector<Eigen::VectorXd> P(N), Lcy(N);
  std::vector<Analysis> an;
  an.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    TransState s = samples[k].state;
    if (traj.time_dependent) s.t = samples[k].t;
    an.push_back(analyze(L, C, s, cond_limit));
    const auto& pe = an.back().pe;
    P[k].resize(ix(d.m + d.n));
    for (std::size_t u = 0; u < d.m; ++u) P[k](ix(u)) = pe.L.gradient(ix(d.w_yl(u)));
    for (std::size_t a = 0; a < d.n; ++a) P[k](ix(d.m + a)) = pe.L.gradient(ix(d.w_yt(a)));
    Lcy[k] = pe.Lc.gradient.segment(ix(d.z_yt(0)), ix(d.n));
  }
  const auto dP = detail::time_derivative(P, traj.dt);
  const auto dLcy = detail::time_derivative(Lcy, traj.dt);

  MonitorReport rep;
  rep.eqlagc.resize(N);
  rep.theorem.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    const auto& a = an[k];
    const auto& pe = a.pe;
    Eigen::VectorXd E_leaf(ix(d.m)), E_trans(ix(d.n));
    for (std::size_t u = 0; u < d.m; ++u) E_leaf(ix(u)) = dP[k](ix(u)) - pe.L.gradient(ix(d.w_xl(u)));
    for (std::size_t b = 0; b < d.n; ++b) E_trans(ix(b)) = dP[k](ix(d.m + b)) - pe.L.gradient(ix(d.w_xt(b)));
    const Eigen::VectorXd r1 = E_trans + pe.C_y().transpose() * E_leaf;

    const Eigen::MatrixXd R = s_curvature_at(a);
    Eigen::VectorXd r2(ix(d.n));
    for (std::size_t b = 0; b < d.n; ++b) {
      const auto yb = ix(d.z_yt(b));
      double acc = dLcy[k](ix(b)) - pe.Lc.gradient(ix(d.z_xt(b)));
      for (std::size_t u = 0; u < d.m; ++u) {
        acc -= pe.C.jac(ix(u), yb) * pe.Lc.gradient(ix(d.z_xl(u)));
        acc -= a.p_leaf(ix(u)) * R(ix(u), ix(b));
      }
      r2(ix(b)) = acc;
    }
    rep.eqlagc[k] = r1.lpNorm<Eigen::Infinity>();
    rep.theorem[k] = r2.lpNorm<Eigen::Infinity>();
    rep.max_eqlagc = std::max(rep.max_eqlagc, rep.eqlagc[k]);
    rep.max_theorem = std::max(rep.max_theorem, rep.theorem[k]);
    rep.max_form_gap = std::max(rep.max_form_gap, (r1 - r2).lpNorm<Eigen::Infinity>());
  }
  return rep;
}

}  // namespace nonholo
