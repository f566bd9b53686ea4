// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. `run_cli` parses arguments, dispatches to the
// subcommands and maps failures to exit codes:
//   0 ok, 1 internal error, 2 configuration error, 3 physics infeasibility,
//   4 analysis non-convergence.
// Errors are reported on stderr as one JSON object.
//
// Requires the configure-time generated header "levmag/bundled_scenarios.hpp"
// (CMake target levmag_bundled).
#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "levmag/bundled_scenarios.hpp"
#include "levmag/cli/derived.hpp"
#include "levmag/cli/io.hpp"
#include "levmag/cli/reference.hpp"
#include "levmag/cli/reproduce.hpp"
#include "levmag/cli/run.hpp"
#include "levmag/cli/scenario.hpp"

namespace levmag::cli {

inline constexpr const char* kOutDirEnv = "LEVMAG_OUT_DIR";
inline constexpr int kExitInternal = 1;

/// Loads a scenario file, or a bundled scenario when `name` is not a file.
inline Scenario resolve_scenario(const std::string& name) {
  if (fs::exists(name)) return load_scenario(name);
  for (const auto& b : bundled_scenarios())
    if (b.name == name) return parse_scenario_text(std::string(b.text));
  throw SchemaError({"no scenario file or bundled scenario named '" + name + "'"});
}

/// Output root: --out, else $LEVMAG_OUT_DIR/<name>, else levmag-out/<name>.
inline fs::path output_dir(const std::string& out_flag, const std::string& name) {
  if (!out_flag.empty()) return out_flag;
  const char* env = std::getenv(kOutDirEnv);
  const fs::path root = env && *env ? fs::path(env) : fs::path("levmag-out");
  return root / name;
}

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

inline void add_common(CLI::App* app, CommonOptions& o, bool config_required) {
  auto* c = app->add_option("--config,-c", o.config,
                            "scenario YAML file or bundled scenario name");
  if (config_required) c->required();
  app->add_option("--seed", o.seed, "override the scenario seed");
  app->add_option("--out,-o", o.out,
                  std::string("output directory (default $") + kOutDirEnv + "/<name>)");
  app->add_option("--threads,-j", o.threads, "worker threads for sweeps")
      ->check(CLI::PositiveNumber);
}

inline Scenario scenario_from(const CommonOptions& o) {
  Scenario s = resolve_scenario(o.config);
  if (o.seed) s.seed = *o.seed;
  return s;
}

inline Json error_json(const std::string& kind, int code, const std::string& message,
                       const std::vector<std::string>& issues = {}) {
  Json j = {{"error", kind}, {"exit_code", code}, {"message", message}};
  if (!issues.empty()) j["issues"] = issues;
  return j;
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_trap(const CommonOptions& o, std::ostream& os) {
  const Scenario s = scenario_from(o);
  const fs::path out = output_dir(o.out, s.name);
  const TrapSolution sol = solve_trap(s);
  Json j;
  j["scenario"] = s.name;
  j["cooldown_height_m"] = sol.cooldown_height;
  j["levitation_height_m"] = sol.spectrum.h_lev;
  j["h_norm"] = sol.spectrum.h_lev / s.magnet.radius;
  Json modes = Json::array();
  for (const auto& m : sol.spectrum.modes)
    modes.push_back({{"label", m.label}, {"frequency_Hz", m.omega / kTwoPi}, {"stable", m.stable}});
  j["modes"] = modes;
  const DerivedRow row = derived_row(s);
  j["derived"] = derived_json(row);
  write_json(out / "trap.json", j);
  write_csv(out / "derived.csv", derived_table({row}));
  os << j.dump(2) << "\n";
  return kExitOk;
}

inline int cmd_simulate(const CommonOptions& o, std::optional<Pipeline> force, std::ostream& os) {
  Scenario s = scenario_from(o);
  if (force) s.pipeline = *force;
  const fs::path out = output_dir(o.out, s.name);
  const RunResult r = run_scenario(s, out);
  os << "wrote " << out.string() << " (status " << r.report["status"].get<std::string>() << ")\n";
  return r.status;
}

inline int cmd_sweep(const CommonOptions& o, std::ostream& os) {
  const Scenario s = scenario_from(o);
  if (!s.sweep) throw SchemaError({"sweep: scenario has no sweep section"});
  const fs::path out = output_dir(o.out, s.name);
  const SweepResult res = run_sweep(s, *s.sweep, o.threads);
  CsvTable grid{{"index"}, {}};
  for (const auto& p : res.parameters) grid.header.push_back("grid_" + p);
  for (const auto& h : derived_header())
    if (h != "index") grid.header.push_back(h);
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (double v : res.points[i]) row.push_back(format_double(v));
    const auto cells = derived_cells(i, res.rows[i]);
    row.insert(row.end(), cells.begin() + 1, cells.end());
    grid.add_row(std::move(row));
  }
  write_csv(out / "sweep.csv", grid);
  write_csv(out / "derived.csv", derived_table(res.rows));
  write_json(out / "sweep.json", sweep_json(res));
  write_json(out / "scenario.json", scenario_to_json(s));
  os << "wrote " << res.rows.size() << " rows to " << out.string() << "\n";
  return kExitOk;
}

struct AnalyzeArgs {
  std::string trace;
  std::vector<double> band;
  std::optional<double> ringdown_frequency;
  std::optional<double> q_guess;
};

inline int cmd_analyze(const CommonOptions& o, const AnalyzeArgs& a, std::ostream& os) {
  AnalysisSpec spec;
  if (!o.config.empty()) spec = resolve_scenario(o.config).analysis;
  const Timetrace tr = read_trace(a.trace);
  AnalyzeOptions opts;
  if (a.band.size() == 2) {
    if (!(a.band[0] < a.band[1])) throw ConfigError("--band must be increasing");
    opts.band_lo_Hz = a.band[0];
    opts.band_hi_Hz = a.band[1];
  }
  opts.ringdown_frequency_Hz = a.ringdown_frequency;
  opts.q_guess = a.q_guess;
  const fs::path out = output_dir(o.out, fs::path(a.trace).stem().string() + "-analysis");
  fs::create_directories(out);
  int status = kExitOk;
  analyze_trace(tr, spec, opts, out, status);
  os << "wrote " << out.string() << "\n";
  return status;
}

struct DesignArgs {
  std::optional<double> radius, gap, Q, temperature, T2, B0, lambda_g;
};

inline int cmd_design(const CommonOptions& o, const DesignArgs& d, std::ostream& os) {
  Scenario s;
  if (!o.config.empty()) s = scenario_from(o);
  else {
    s.name = "design";
    s.magnet.radius = 0.25e-6;
  }
  if (d.radius) s.magnet.radius = *d.radius;
  if (d.gap) s.design.gap_m = *d.gap;
  if (d.Q) s.design.Q = *d.Q;
  if (d.temperature) s.design.temperature_K = *d.temperature;
  if (d.T2) s.design.T2_s = *d.T2;
  if (d.B0) s.design.B0_T = *d.B0;
  if (d.lambda_g) s.design.lambda_g_Hz = *d.lambda_g;
  const DesignInputs in = design_inputs(s);
  DesignReport r;
  try {
    r = design_report(in);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  const fs::path out = output_dir(o.out, s.name);
  write_json(out / "design.json", design_json(in, r));
  const std::string text = design_text(r);
  write_text(out / "design.txt", text);
  os << text;
  return kExitOk;
}

inline int cmd_reproduce(const CommonOptions& o, const std::string& figure, std::ostream& os) {
  const std::uint64_t seed = o.seed.value_or(1);
  const fs::path out = output_dir(o.out, "reproduce-" + figure);
  fs::create_directories(out);
  write_csv(out / "reference_values.csv", reference_csv());
  int status = kExitOk;
  if (figure == "fig2d") {
    reproduce_fig2d(out, o.threads, seed);
  } else if (figure == "fig2e") {
    reproduce_fig2e(out, o.threads, seed, status);
  } else {
    Scenario s = resolve_scenario(o.config.empty() ? "fig3-coupling" : o.config);
    if (o.seed) s.seed = *o.seed;
    reproduce_fig3(s, out, o.threads, status);
  }
  os << "wrote " << out.string() << "\n";
  return status;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& os = std::cout,
                   std::ostream& es = std::cerr) {
  CLI::App app{"levmag: levitated micromagnet spin-mechanics simulator and analysis toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "levmag 0.1.0");

  CommonOptions trap_o, sim_o, ring_o, sweep_o, an_o, des_o, rep_o;
  auto* trap = app.add_subcommand("trap", "solve the trap: levitation height and normal modes");
  add_common(trap, trap_o, true);
  auto* sim = app.add_subcommand("simulate", "run a scenario: trap, simulate, measure, analyze");
  add_common(sim, sim_o, true);
  auto* ring = app.add_subcommand("ringdown", "run a scenario's ringdown measurement");
  add_common(ring, ring_o, true);
  auto* sweep = app.add_subcommand("sweep", "tabulate derived quantities over a parameter grid");
  add_common(sweep, sweep_o, true);

  auto* an = app.add_subcommand("analyze", "analyze a stored trace (PSD, band variance, fits)");
  add_common(an, an_o, false);
  AnalyzeArgs an_a;
  an->add_option("--trace", an_a.trace, "trace sidecar (.json) or data (.f64) file")->required();
  an->add_option("--band", an_a.band, "integration band [Hz]: LO HI")->expected(2);
  an->add_option("--ringdown-frequency", an_a.ringdown_frequency,
                 "fit an energy decay at this mode frequency [Hz]");
  an->add_option("--q-guess", an_a.q_guess, "initial Q for the ringdown fit");

  auto* des = app.add_subcommand("design", "coupling and cooperativity design report");
  add_common(des, des_o, false);
  DesignArgs des_a;
  des->add_option("--radius-m", des_a.radius, "magnet radius [m]");
  des->add_option("--gap-m", des_a.gap, "NV to magnet-surface gap [m]");
  des->add_option("--Q", des_a.Q, "mechanical quality factor");
  des->add_option("--temperature-K", des_a.temperature, "bath temperature [K]");
  des->add_option("--T2-s", des_a.T2, "spin coherence time [s]");
  des->add_option("--B0-T", des_a.B0, "external field [T]");
  des->add_option("--lambda-g-Hz", des_a.lambda_g, "use this coupling instead of the model");

  auto* rep = app.add_subcommand("reproduce", "regenerate the data behind a figure");
  add_common(rep, rep_o, false);
  std::string figure;
  rep->add_option("figure", figure, "fig2d | fig2e | fig3")
      ->required()
      ->check(CLI::IsMember({"fig2d", "fig2e", "fig3"}));

  auto* list = app.add_subcommand("scenarios", "list the bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    os << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    os << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    os << "levmag 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    es << error_json("usage", kExitConfig, e.what()).dump() << "\n";
    return kExitConfig;
  }

  try {
    if (*trap) return cmd_trap(trap_o, os);
    if (*sim) return cmd_simulate(sim_o, std::nullopt, os);
    if (*ring) return cmd_simulate(ring_o, Pipeline::ringdown, os);
    if (*sweep) return cmd_sweep(sweep_o, os);
    if (*an) return cmd_analyze(an_o, an_a, os);
    if (*des) return cmd_design(des_o, des_a, os);
    if (*rep) return cmd_reproduce(rep_o, figure, os);
    if (*list) {
      for (const auto& b : bundled_scenarios()) os << b.name << "\n";
      return kExitOk;
    }
  } catch (const SchemaError& e) {
    es << error_json("config", kExitConfig, e.what(), e.issues()).dump() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    es << error_json("config", kExitConfig, e.what()).dump() << "\n";
    return kExitConfig;
  } catch (const YAML::Exception& e) {
    es << error_json("config", kExitConfig, e.what()).dump() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    es << error_json("config", kExitConfig, e.what()).dump() << "\n";
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    es << error_json("infeasible", kExitInfeasible, e.what()).dump() << "\n";
    return kExitInfeasible;
  } catch (const StatisticsError& e) {
    es << error_json("analysis", kExitAnalysis, e.what()).dump() << "\n";
    return kExitAnalysis;
  } catch (const CalibrationError& e) {
    es << error_json("analysis", kExitAnalysis, e.what()).dump() << "\n";
    return kExitAnalysis;
  } catch (const ConvergenceError& e) {
    es << error_json("analysis", kExitAnalysis, e.what()).dump() << "\n";
    return kExitAnalysis;
  } catch (const std::exception& e) {
    es << error_json("internal", kExitInternal, e.what()).dump() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

} // namespace levmag::cli
