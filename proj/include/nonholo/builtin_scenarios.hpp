#pragma once

// The six built-in scenarios, stored in the same JSON schema the CLI reads.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nonholo::builtin {

struct Entry {
  std::string_view name;
  std::string_view json;
};

inline constexpr std::string_view kAppellLinear = R"json({
  "name": "appell_linear",
  "description": "Appell's machine with linear constraints: three leaf coordinates, two transverse angles on a torus.",
  "dims": {"m": 3, "n": 2},
  "parameters": {"R": 2, "r": 1, "alpha": 1, "beta": 1, "I1": 1, "I2": 1, "gamma": 1},
  "parameter_checks": [
    {"expr": "I1 + alpha*R^2 + beta*r^2", "rule": "nonzero", "message": "I1 + alpha*R^2 + beta*r^2 must be nonzero"},
    {"expr": "I2", "rule": "nonzero", "message": "I2 must be nonzero"}
  ],
  "lagrangian": "alpha/2*(y1^2 + y2^2) + beta/2*y3^2 + I1/2*yb1^2 + I2/2*yb2^2 + gamma*x3",
  "constraint": {
    "kind": "linear",
    "coefficients": [["R*cos(xb2)", "0"], ["R*sin(xb2)", "0"], ["r", "0"]]
  },
  "initial": {"x_leaf": [0, 0, 0], "x_trans": [0, 0.3], "y_trans": [0.5, 0.7]},
  "time": {"t0": 0, "t1": 1, "dt": 0.0001},
  "guards": [],
  "checks": [
    {"name": "yb2 constant", "type": "constant", "expr": "yb2", "tol": 1e-12},
    {"name": "yb1 affine in t", "type": "affine_in_t", "expr": "yb1", "tol": 1e-6,
     "slope": "r*gamma/(I1 + alpha*R^2 + beta*r^2)", "slope_tol": 1e-9},
    {"name": "B^1_12 = -R sin(xb2)", "type": "tensor", "quantity": "B", "index": [1, 1, 2], "value": "-R*sin(xb2)", "tol": 1e-12},
    {"name": "B^2_12 = R cos(xb2)", "type": "tensor", "quantity": "B", "index": [2, 1, 2], "value": "R*cos(xb2)", "tol": 1e-12},
    {"name": "B^3_12 = 0", "type": "tensor", "quantity": "B", "index": [3, 1, 2], "value": "0", "tol": 1e-12},
    {"name": "nonlinearity tensor vanishes", "type": "tensor", "quantity": "Ctensor", "value": "0", "tol": 0},
    {"name": "monitor", "type": "monitor", "max": 1e-5}
  ],
  "annotations": [
    {"quantity": "dyb1/dt", "displayed": "-alpha''*r", "oracle": "r*gamma/alpha'' with alpha'' = I1 + alpha*R^2 + beta*r^2"}
  ]
})json";

inline constexpr std::string_view kAppellNonlinear = R"json({
  "name": "appell_nonlinear",
  "description": "Appell's machine with the nonlinear constraint y1 = alpha*|yb| (positive branch).",
  "dims": {"m": 1, "n": 2},
  "parameters": {"alpha": 1, "beta": 1, "gamma": 1, "delta": 1},
  "parameter_checks": [{"expr": "alpha", "rule": "nonzero", "message": "alpha must be nonzero"}],
  "lagrangian": "beta/2*(yb1^2 + yb2^2) + gamma/2*y1^2 + delta*x1",
  "constraint": {"kind": "nonlinear", "expressions": ["alpha*sqrt(yb1^2 + yb2^2)"]},
  "initial": {"x_leaf": [0], "x_trans": [0, 0], "y_trans": [0.6, 0.8]},
  "time": {"t0": 0, "t1": 1, "dt": 0.0001},
  "guards": [{"name": "cone vertex", "expr": "sqrt(yb1^2 + yb2^2)", "min": 1e-8}],
  "checks": [
    {"name": "direction of yb constant", "type": "direction_constant", "coords": ["yb1", "yb2"], "tol": 1e-8},
    {"name": "|yb| affine in t", "type": "affine_in_t", "expr": "sqrt(yb1^2 + yb2^2)", "tol": 1e-6,
     "slope": "alpha*delta/(alpha^2*gamma + beta)", "slope_tol": 1e-6},
    {"name": "transverse path straight", "type": "straight_path", "coords": ["xb1", "xb2"], "tol": 1e-9},
    {"name": "pseudo-curvature vanishes", "type": "tensor", "quantity": "K", "value": "0", "tol": 0},
    {"name": "monitor", "type": "monitor", "max": 1e-5}
  ],
  "annotations": [
    {"quantity": "d|yb|/dt", "displayed": "alpha' = -alpha/(2*(gamma*alpha^2 + beta))", "oracle": "alpha*delta/(alpha^2*gamma + beta)"}
  ]
})json";

inline constexpr std::string_view kAppellHammel = R"json({
  "name": "appell_hammel",
  "description": "Appell-Hammel system in an elevator: time-dependent constraint y1 = v0(t) + alpha*|yb| with v0 = accel*t.",
  "dims": {"m": 1, "n": 2},
  "parameters": {"alpha": 1, "beta": 1, "gamma": 1, "delta": 1, "accel": 0.5},
  "parameter_checks": [{"expr": "alpha", "rule": "nonzero", "message": "alpha must be nonzero"}],
  "lagrangian": "beta/2*(yb1^2 + yb2^2) + gamma/2*y1^2 + delta*x1",
  "constraint": {"kind": "nonlinear", "expressions": ["accel*t + alpha*sqrt(yb1^2 + yb2^2)"]},
  "initial": {"x_leaf": [0], "x_trans": [0, 0], "y_trans": [0.6, 0.8]},
  "time": {"t0": 0, "t1": 1, "dt": 0.0001},
  "guards": [{"name": "cone vertex", "expr": "sqrt(yb1^2 + yb2^2)", "min": 1e-8}],
  "checks": [
    {"name": "direction of yb constant", "type": "direction_constant", "coords": ["yb1", "yb2"], "tol": 1e-8},
    {"name": "planar speed affine in t", "type": "affine_in_t", "expr": "sqrt(yb1^2 + yb2^2)", "tol": 1e-6,
     "slope": "alpha*(delta - gamma*accel)/(alpha^2*gamma + beta)", "slope_tol": 1e-6},
    {"name": "monitor", "type": "monitor", "max": 1e-5},
    {"name": "residual forms agree", "type": "forms_agree", "max": 1e-6}
  ],
  "annotations": [
    {"quantity": "d(speed)/dt", "displayed": "alpha*delta + gamma*dv0/dt", "oracle": "alpha*(delta - gamma*dv0/dt)/(alpha^2*gamma + beta)"}
  ]
})json";

inline constexpr std::string_view kBenenti = R"json({
  "name": "benenti",
  "description": "Benenti mechanism: y1*yb3 - yb1*yb2 = 0 solved as C1 = yb1*yb2/yb3; f scales the potential.",
  "dims": {"m": 1, "n": 3},
  "parameters": {"alpha": 1, "beta": 1, "f": 0},
  "parameter_checks": [],
  "lagrangian": "alpha/2*(y1^2 + yb1^2) + beta/2*(yb2^2 + yb3^2) + f*(sin(x1) + 0.5*xb1^2 + xb2*xb3)",
  "constraint": {"kind": "nonlinear", "expressions": ["yb1*yb2/yb3"]},
  "initial": {"x_leaf": [0], "x_trans": [0, 0, 0], "y_trans": [0.8, 0.6, 1.2]},
  "time": {"t0": 0, "t1": 1, "dt": 0.0001},
  "guards": [{"name": "yb3 = 0", "expr": "abs(yb3)", "min": 1e-8}],
  "checks": [
    {"name": "semispray identically zero", "type": "tensor", "quantity": "S", "value": "0", "tol": 0, "requires_zero": ["f"]},
    {"name": "straight lines", "type": "straight_path", "coords": ["xb1", "xb2", "xb3"], "tol": 1e-9, "requires_zero": ["f"]},
    {"name": "monitor", "type": "monitor", "max": 1e-5}
  ],
  "annotations": [
    {"quantity": "F", "displayed": "F_1 = -f_xb1 + f_x1*yb2*yb3/yb1^2, F_2 = -f_xb2 - f_x1*yb3/yb1, F_3 = -f_xb3 - f_x1*yb2/yb1",
     "oracle": "F_a = -f_xba - f_x1*dC/dyba with dC/dyb = (yb2/yb3, yb1/yb3, -yb1*yb2/yb3^2)"},
    {"quantity": "h^{-1}", "displayed": "displayed 3x3 matrix (first row -yb1^2*(...)/((yb2*yb3)^2*alpha*beta*(alpha+beta)), ...)",
     "oracle": "numerical inverse of h from the assembled bilinear form; the displayed matrix is not reproduced"}
  ]
})json";

inline constexpr std::string_view kMarle = R"json({
  "name": "marle",
  "description": "Marle servomechanism: y1 = f(x1, xb1, yb1) with f = k1*yb1 + k2*yb1^2 + k3*sin(x1).",
  "dims": {"m": 1, "n": 1},
  "parameters": {"mass": 1, "l": 1, "J": 2, "grav": 9.81, "k1": 1, "k2": 0.5, "k3": 0},
  "parameter_checks": [],
  "lagrangian": "mass/2*(y1^2 - 2*l*y1*yb1*sin(xb1)) + J/2*yb1^2 - mass*grav*l*sin(xb1)",
  "constraint": {"kind": "nonlinear", "expressions": ["k1*yb1 + k2*yb1^2 + k3*sin(x1)"]},
  "initial": {"x_leaf": [0], "x_trans": [0.3], "y_trans": [0.5]},
  "time": {"t0": 0, "t1": 2, "dt": 0.0001},
  "guards": [],
  "checks": [
    {"name": "Ctensor^1_11 = d2f/dyb1^2", "type": "tensor", "quantity": "Ctensor", "index": [1, 1, 1], "value": "2*k2", "tol": 1e-12},
    {"name": "pseudo-curvature vanishes for f = f(yb1)", "type": "tensor", "quantity": "K", "value": "0", "tol": 0, "requires_zero": ["k3"]},
    {"name": "monitor", "type": "monitor", "max": 1e-5}
  ],
  "annotations": [
    {"quantity": "R_V", "displayed": "d2f/d(yb1)^2 d/dx1", "oracle": "that expression is the nonlinearity tensor; the pseudo-curvature K is 0 for f = f(yb1)"}
  ]
})json";

inline constexpr std::string_view kRiemannianFlow = R"json({
  "name": "riemannian_flow",
  "description": "One-dimensional riemannian foliation with the quadratic time-dependent constraint L = phi(t)/2, phi = phi0/t; curv = 0 is the flat metric.",
  "dims": {"m": 1, "n": 2},
  "parameters": {"g0": 1, "g11": 0.5, "g22": 0.5, "curv": 0, "phi0": 1, "c1": 1, "c2": 0.5, "d1": 0, "d2": 0},
  "presets": {"flat": {"curv": 0}, "curved": {"curv": 0.5}},
  "parameter_checks": [
    {"expr": "g0", "rule": "nonzero", "message": "g0 must be nonzero"},
    {"expr": "phi0", "rule": "positive", "message": "phi0 must be positive"}
  ],
  "lagrangian": "0.5*g0^2*y1^2 + 0.5*(g11*(1 + curv*sin(xb2)^2)*yb1^2 + g22*yb2^2)",
  "constraint": {"kind": "nonlinear", "expressions": ["sqrt(phi0/t - (g11*(1 + curv*sin(xb2)^2)*yb1^2 + g22*yb2^2))/g0"]},
  "initial": {"x_leaf": [0], "x_trans": ["2*c1*sqrt(phi0*t) + d1", "2*c2*sqrt(phi0*t) + d2"], "y_trans": ["c1*sqrt(phi0/t)", "c2*sqrt(phi0/t)"]},
  "time": {"t0": 1, "t1": 4, "dt": 0.0001},
  "guards": [{"name": "constraint boundary", "expr": "phi0/t - (g11*(1 + curv*sin(xb2)^2)*yb1^2 + g22*yb2^2)", "min": 1e-12}],
  "checks": [
    {"name": "xb1 = 2*c1*sqrt(phi0*t) + d1", "type": "closed_form", "expr": "xb1", "value": "2*c1*sqrt(phi0*t) + d1", "tol": 1e-6, "requires_zero": ["curv"]},
    {"name": "xb2 = 2*c2*sqrt(phi0*t) + d2", "type": "closed_form", "expr": "xb2", "value": "2*c2*sqrt(phi0*t) + d2", "tol": 1e-6, "requires_zero": ["curv"]},
    {"name": "monitor", "type": "monitor", "max": 1e-5}
  ],
  "annotations": [
    {"quantity": "dyb/dt", "displayed": "yb*phi'/(2*phi) in the flat case", "oracle": "semispray of the assembled equations"}
  ]
})json";

inline const std::vector<Entry>& entries() {
  static const std::vector<Entry> e = {
      {"appell_linear", kAppellLinear}, {"appell_nonlinear", kAppellNonlinear}, {"appell_hammel", kAppellHammel},
      {"benenti", kBenenti},            {"marle", kMarle},                       {"riemannian_flow", kRiemannianFlow},
  };
  return e;
}

}  // namespace nonholo::builtin
