#pragma once

// Command-line front end. run() is separate from main() so tests can drive
// it with captured streams.

#include <atomic>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nonholo/nonholo.hpp"

namespace nonholo::app {

enum ExitCode : int {
  kOk = 0,
  kVerifyFailed = 1,
  kDegenerate = 2,
  kNewton = 3,
  kSingularity = 4,
  kConfig = 5,
};

inline int exit_code_for(StopReason r) {
  switch (r) {
    case StopReason::Completed: return kOk;
    case StopReason::Degenerate: return kDegenerate;
    case StopReason::NewtonFailure: return kNewton;
    case StopReason::Singularity:
    case StopReason::NonFinite: return kSingularity;
  }
  return kSingularity;
}

/// Shortest round-trip decimal form, independent of the C locale.
inline std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::pair<std::string, double> parse_assignment(const std::string& kv, const std::string& flag) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(flag + " expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string val = kv.substr(eq + 1);
  double v = 0.0;
  const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
  if (res.ec != std::errc() || res.ptr != val.data() + val.size()) {
    throw ConfigError(flag + " value for '" + key + "' is not a number: '" + val + "'");
  }
  return {key, v};
}

inline std::string csv_header(const ChartDims& d) {
  std::string h = "t";
  for (std::size_t u = 1; u <= d.m; ++u) h += ",x" + std::to_string(u);
  for (std::size_t a = 1; a <= d.n; ++a) h += ",xb" + std::to_string(a);
  for (std::size_t u = 1; u <= d.m; ++u) h += ",y" + std::to_string(u);
  for (std::size_t a = 1; a <= d.n; ++a) h += ",yb" + std::to_string(a);
  return h + ",residual_max";
}

inline void write_csv(std::ostream& os, const Trajectory& traj) {
  os << csv_header(traj.dims) << '\n';
  for (const auto& s : traj.samples) {
    std::string line = fmt(s.t);
    auto put = [&](const Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) line += "," + fmt(v(i));
    };
    put(s.state.x_leaf);
    put(s.state.x_trans);
    put(s.y_leaf);
    put(s.state.y_trans);
    line += "," + fmt(s.residual);
    os << line << '\n';
  }
}

struct Options {
  std::string scenario;
  std::string config;
  std::string preset;
  std::vector<std::string> params;
  std::vector<std::string> initial;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::string out;
  std::uint64_t seed = kDefaultSeed;
  bool json = false;
  bool all = false;
  bool corrupt_force_sign = false;
};

inline Scenario load_from(const Options& o, const std::string& builtin_name = {}) {
  ParamMap overrides;
  for (const auto& p : o.params) {
    const auto [k, v] = parse_assignment(p, "--param");
    overrides[k] = v;
  }
  const std::optional<std::string> preset = o.preset.empty() ? std::nullopt : std::optional<std::string>(o.preset);
  json doc;
  if (!builtin_name.empty()) {
    doc = builtin_json(builtin_name);
  } else if (!o.scenario.empty() && !o.config.empty()) {
    throw ConfigError("use either --scenario or --config, not both");
  } else if (!o.scenario.empty()) {
    doc = builtin_json(o.scenario);
  } else if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("cannot open config file '" + o.config + "'");
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file '" + o.config + "' is not valid JSON: " + e.what());
    }
  } else {
    throw ConfigError("no scenario given: use --scenario NAME or --config FILE");
  }
  Scenario sc = load_scenario(doc, overrides, preset);
  for (const auto& kv : o.initial) {
    const auto [k, v] = parse_assignment(kv, "--initial");
    const auto pn = detail::split_chart_name(k);
    if (!pn || pn->prefix == "t" || pn->prefix == "y") throw ConfigError("--initial cannot set '" + k + "'");
    Eigen::VectorXd* target = pn->prefix == "x" ? &sc.initial.x_leaf : pn->prefix == "xb" ? &sc.initial.x_trans : &sc.initial.y_trans;
    if (pn->index >= static_cast<std::size_t>(target->size())) throw ConfigError("--initial: '" + k + "' is outside the chart");
    (*target)(static_cast<Eigen::Index>(pn->index)) = v;
  }
  if (o.dt && !(*o.dt > 0.0)) throw ConfigError("--dt must be positive");
  if (o.t_end && !(*o.t_end > sc.t0)) throw ConfigError("--t-end must exceed t0 = " + fmt(sc.t0));
  return sc;
}

inline int cmd_list(const Options& o, std::ostream& out) {
  if (o.json) {
    json cat = json::array();
    for (const auto& name : builtin_names()) {
      const auto doc = builtin_json(name);
      cat.push_back({{"name", name},
                     {"description", doc.value("description", "")},
                     {"dims", doc.at("dims")},
                     {"parameters", doc.at("parameters")},
                     {"presets", doc.value("presets", json::object())},
                     {"time", doc.at("time")}});
    }
    out << cat.dump(2) << '\n';
    return kOk;
  }
  for (const auto& name : builtin_names()) {
    const auto doc = builtin_json(name);
    out << name << "  (m=" << doc["dims"]["m"] << ", n=" << doc["dims"]["n"] << ")\n";
    out << "  " << doc.value("description", "") << '\n';
    out << "  parameters:";
    for (const auto& [k, v] : doc.at("parameters").items()) out << ' ' << k << '=' << fmt(v.get<double>());
    out << '\n';
    if (doc.contains("presets")) {
      out << "  presets:";
      for (const auto& [k, v] : doc.at("presets").items()) out << ' ' << k;
      out << '\n';
    }
  }
  return kOk;
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const Scenario sc = load_from(o);
  for (const auto& w : sc.warnings) err << "warning: " << w << '\n';
  const double dt = o.dt.value_or(sc.dt);
  const double t_end = o.t_end.value_or(sc.t1);
  const auto res = simulate(sc.L, sc.C, sc.initial, t_end, dt, sc.options);

  std::ostream* csv = &out;
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out, std::ios::binary);
    if (!file) throw ConfigError("cannot write '" + o.out + "'");
    csv = &file;
  }
  write_csv(*csv, res.trajectory);
  std::ostream& summary = o.out.empty() ? err : out;

  double max_res = 0.0;
  for (const auto& s : res.trajectory.samples) max_res = std::max(max_res, s.residual);
  if (o.json) {
    json j = {{"scenario", sc.name},
              {"status", stop_reason_name(res.stop)},
              {"message", res.message},
              {"samples", res.trajectory.samples.size()},
              {"max_residual", max_res}};
    if (!res.trajectory.samples.empty()) {
      const auto& last = res.trajectory.samples.back();
      j["final"] = {{"t", last.t},
                    {"x_leaf", std::vector<double>(last.state.x_leaf.begin(), last.state.x_leaf.end())},
                    {"x_trans", std::vector<double>(last.state.x_trans.begin(), last.state.x_trans.end())},
                    {"y_leaf", std::vector<double>(last.y_leaf.begin(), last.y_leaf.end())},
                    {"y_trans", std::vector<double>(last.state.y_trans.begin(), last.state.y_trans.end())}};
    }
    summary << j.dump(2) << '\n';
  } else {
    summary << sc.name << ": " << stop_reason_name(res.stop);
    if (!res.message.empty()) summary << " (" << res.message << ")";
    summary << ", " << res.trajectory.samples.size() << " samples, max residual " << fmt(max_res) << '\n';
    if (!res.trajectory.samples.empty()) {
      const auto& last = res.trajectory.samples.back();
      summary << "final t=" << fmt(last.t);
      auto put = [&](const char* name, const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) summary << ' ' << name << i + 1 << '=' << fmt(v(i));
      };
      put("x", last.state.x_leaf);
      put("xb", last.state.x_trans);
      put("y", last.y_leaf);
      put("yb", last.state.y_trans);
      summary << '\n';
    }
  }
  if (!res.ok()) err << "error: " << stop_reason_name(res.stop) << ": " << res.message << '\n';
  return exit_code_for(res.stop);
}

struct VerifyOutcome {
  ScenarioReport report;
  std::vector<SuiteResult> suites;
  bool passed() const {
    return report.passed() && std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
  }
};

inline VerifyOutcome verify_scenario(const Scenario& sc, const Options& o) {
  VerifyOutcome v;
  v.report = run_reference_checks(sc, o.dt.value_or(sc.dt), o.t_end);
  v.suites = global_suites(sc, o.seed);
  return v;
}

inline json to_json(const VerifyOutcome& v) {
  json checks = json::array();
  for (const auto& c : v.report.checks) {
    checks.push_back({{"name", c.name}, {"type", c.type}, {"passed", c.passed}, {"skipped", c.skipped},
                      {"measured", c.measured}, {"threshold", c.threshold}, {"detail", c.detail}});
  }
  json suites = json::array();
  for (const auto& s : v.suites) {
    suites.push_back({{"name", s.name}, {"passed", s.passed}, {"measured", s.measured}, {"threshold", s.threshold},
                      {"tested", s.tested}, {"skipped", s.skipped}});
  }
  json ann = json::array();
  for (const auto& a : v.report.annotations) ann.push_back({{"quantity", a.quantity}, {"displayed", a.displayed}, {"oracle", a.oracle}});
  return {{"scenario", v.report.scenario}, {"passed", v.passed()},
          {"simulation", stop_reason_name(v.report.stop)}, {"message", v.report.message},
          {"max_residual", v.report.max_residual}, {"checks", checks}, {"suites", suites}, {"annotations", ann}};
}

inline void print_table(std::ostream& out, const VerifyOutcome& v) {
  out << "== " << v.report.scenario << " (dt=" << fmt(v.report.dt) << ", " << v.report.samples
      << " samples, simulation " << stop_reason_name(v.report.stop) << ")\n";
  if (!v.report.message.empty()) out << "   " << v.report.message << '\n';
  auto row = [&](const std::string& status, const std::string& name, double measured, double threshold,
                 const std::string& detail) {
    out << "  " << std::left << std::setw(5) << status << ' ' << std::setw(44) << name << " measured "
        << std::setw(12) << fmt(measured) << " limit " << std::setw(10) << fmt(threshold);
    if (!detail.empty()) out << "  " << detail;
    out << '\n';
  };
  for (const auto& c : v.report.checks) {
    row(c.skipped ? "SKIP" : c.passed ? "PASS" : "FAIL", c.name, c.measured, c.threshold, c.detail);
  }
  for (const auto& s : v.suites) {
    row(s.passed ? "PASS" : "FAIL", s.name, s.measured, s.threshold,
        std::to_string(s.tested) + " samples" + (s.skipped ? ", " + std::to_string(s.skipped) + " outside domain" : ""));
  }
  for (const auto& a : v.report.annotations) {
    out << "  note  " << a.quantity << ": displayed " << a.displayed << "; computed " << a.oracle << '\n';
  }
  out << "  => " << (v.passed() ? "PASS" : "FAIL") << '\n';
}

// Restores the force-sign hook when verify returns.
struct ForceSignFlip {
  explicit ForceSignFlip(bool on) : on_(on) {
    if (on_) testing_hooks::flip_force_sign = true;
  }
  ~ForceSignFlip() {
    if (on_) testing_hooks::flip_force_sign = false;
  }
  ForceSignFlip(const ForceSignFlip&) = delete;
  ForceSignFlip& operator=(const ForceSignFlip&) = delete;

 private:
  bool on_;
};

inline int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  ForceSignFlip flip(o.corrupt_force_sign);
  std::vector<Scenario> scenarios;
  if (o.all) {
    if (!o.scenario.empty() || !o.config.empty()) throw ConfigError("--all cannot be combined with --scenario/--config");
    if (!o.params.empty() || !o.initial.empty() || !o.preset.empty()) {
      throw ConfigError("--all does not accept --param, --initial or --preset");
    }
    for (const auto& name : builtin_names()) scenarios.push_back(load_from(o, name));
  } else {
    scenarios.push_back(load_from(o));
  }
  bool all_ok = true;
  json arr = json::array();
  for (const auto& sc : scenarios) {
    for (const auto& w : sc.warnings) err << "warning: " << sc.name << ": " << w << '\n';
    const auto v = verify_scenario(sc, o);
    all_ok = all_ok && v.passed();
    if (o.json) arr.push_back(to_json(v));
    else print_table(out, v);
  }
  if (o.json) out << (o.all ? arr : arr.at(0)).dump(2) << '\n';
  else if (scenarios.size() > 1) out << (all_ok ? "all scenarios passed" : "some checks failed") << '\n';
  return all_ok ? kOk : kVerifyFailed;
}

inline int cmd_export(const Options& o, std::ostream& out) {
  const Scenario sc = load_from(o);
  const std::string text = export_json(sc).dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + o.out + "'");
    f << text;
  }
  return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Nonholonomic Lagrangian dynamics: simulate and verify constrained systems.", "nonholo"};
  cli.require_subcommand(1);
  Options o;

  auto scenario_flags = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "built-in scenario name (see `list`)");
    sub->add_option("--config", o.config, "scenario JSON file");
    sub->add_option("--preset", o.preset, "named parameter preset of the scenario");
    sub->add_option("--param", o.params, "parameter override key=value (repeatable)")->take_all();
    sub->add_option("--initial", o.initial, "initial value override, e.g. yb1=0 (repeatable)")->take_all();
  };

  auto* list = cli.add_subcommand("list", "list built-in scenarios");
  list->add_flag("--json", o.json, "machine-readable catalog");

  auto* sim = cli.add_subcommand("simulate", "integrate a scenario and write its trajectory as CSV");
  scenario_flags(sim);
  sim->add_option("--dt", o.dt, "step size");
  sim->add_option("--t-end", o.t_end, "final time");
  sim->add_option("--out", o.out, "CSV output path (default: stdout)");
  sim->add_flag("--json", o.json, "print the summary as JSON");

  auto* ver = cli.add_subcommand("verify", "run reference checks and invariant suites");
  scenario_flags(ver);
  ver->add_flag("--all", o.all, "verify every built-in scenario");
  ver->add_option("--dt", o.dt, "step size for the reference simulation");
  ver->add_option("--t-end", o.t_end, "final time for the reference simulation");
  ver->add_option("--seed", o.seed, "seed for randomized suites");
  ver->add_flag("--json", o.json, "print the report as JSON");
  ver->add_flag("--corrupt-force-sign", o.corrupt_force_sign, "negative control: flip the sign of F")
      ->group("");

  auto* exp = cli.add_subcommand("export", "print a scenario as a JSON config");
  scenario_flags(exp);
  exp->add_option("--out", o.out, "output path (default: stdout)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (list->parsed()) return cmd_list(o, out);
    if (sim->parsed()) return cmd_simulate(o, out, err);
    if (ver->parsed()) return cmd_verify(o, out, err);
    if (exp->parsed()) return cmd_export(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const Degenerate& e) {
    err << "error: " << e.what() << '\n';
    return kDegenerate;
  } catch (const SingularJacobian& e) {
    err << "error: " << e.what() << '\n';
    return kNewton;
  } catch (const NoConvergence& e) {
    err << "error: " << e.what() << '\n';
    return kNewton;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kSingularity;
  }
  return kConfig;
}

}  // namespace nonholo::app
