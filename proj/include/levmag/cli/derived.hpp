// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form quantities derived from a scenario (trap modes, couplings,
// decoherence, cooperativity), design reports, and parameter sweeps.
#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "levmag/cli/io.hpp"
#include "levmag/cli/scenario.hpp"
#include "levmag/magnetostatics.hpp"
#include "levmag/spin_coupling.hpp"

namespace levmag::cli {

struct TrapSolution {
  double cooldown_height = 0; // m
  ModeSpectrum spectrum;
};

/// Cooldown pose, equilibrium and normal modes for the scenario's trap.
/// Throws InfeasibleError when there is no stable levitation point.
inline TrapSolution solve_trap(const Scenario& s) {
  s.magnet.validate();
  s.constants.validate();
  Pose cool;
  cool.position = Vec3(s.trap.lateral_x_m, s.trap.lateral_y_m, s.target_height());
  cool.orientation = s.trap.orientation;
  TrapSolution sol;
  sol.cooldown_height =
      s.trap.height_is_levitation
          ? cooldown_height_for(s.magnet, cool, s.target_height(), s.trap.gravity, s.constants)
          : s.target_height();
  cool.position.z() = sol.cooldown_height;
  const TrapSystem trap(s.magnet, cool, s.trap.gravity, s.constants);
  sol.spectrum = mode_frequencies(trap);
  if (!sol.spectrum.all_stable()) throw InfeasibleError("trap has an unstable normal mode");
  return sol;
}

inline Vec3 mode_direction(const std::string& label) {
  if (label == "x") return Vec3::UnitX();
  if (label == "y") return Vec3::UnitY();
  if (label == "z") return Vec3::UnitZ();
  throw DomainError("mode '" + label + "' has no translation direction");
}

/// One row of derived quantities. All frequencies are ordinary (Hz).
struct DerivedRow {
  std::string status = "ok"; // ok | infeasible | error
  std::string message;
  double radius_m = 0;
  double cooldown_height_m = NAN;
  double h_lev_m = NAN;
  double h_norm = NAN;
  double f_x_Hz = NAN, f_y_Hz = NAN, f_z_Hz = NAN, f_theta_Hz = NAN, f_phi_Hz = NAN;
  std::string coupling_mode;
  double x_zp_m = NAN;
  double r_prime_m = NAN;
  double gap_m = NAN;
  double f_g = NAN;
  double lambda_g_Hz = NAN;
  double f_dp = NAN;
  double lambda_dp_Hz = NAN;
  double lambda_dp_prefactor_Hz = NAN; // value at f_dp = 1
  double omega_l_Hz = NAN;
  double Q = NAN;
  double temperature_K = NAN;
  double T2_s = NAN;
  double B0_T = NAN;
  double gamma_th_Hz = NAN;
  double cooperativity = NAN;
};

inline DerivedRow derived_row(const Scenario& s) {
  DerivedRow row;
  row.radius_m = s.magnet.radius;
  row.coupling_mode = s.nv.coupling_mode;
  row.Q = s.design.Q;
  row.temperature_K = s.design_temperature();
  row.T2_s = s.design.T2_s;
  row.B0_T = s.design.B0_T;
  const NVProbe probe = s.nv_probe();
  row.r_prime_m = probe.position_rel_magnet.norm();
  row.gap_m = row.r_prime_m - s.magnet.radius;
  try {
    row.gamma_th_Hz = thermal_decoherence(row.temperature_K, row.Q, s.constants) / kTwoPi;
    const auto lib = libration_frequencies(s.magnet, s.design.B0_T, s.constants);
    row.omega_l_Hz = lib.omega_libration / kTwoPi;
    const auto dp = dipole_coupling(s.magnet, probe, s.constants);
    row.f_dp = dp.f_dp;
    row.lambda_dp_Hz = dp.lambda_dp / kTwoPi;
    row.lambda_dp_prefactor_Hz = dp.lambda_dp_prefactor / kTwoPi;

    const TrapSolution sol = solve_trap(s);
    row.cooldown_height_m = sol.cooldown_height;
    row.h_lev_m = sol.spectrum.h_lev;
    row.h_norm = row.h_lev_m / s.magnet.radius;
    row.f_x_Hz = sol.spectrum["x"].omega / kTwoPi;
    row.f_y_Hz = sol.spectrum["y"].omega / kTwoPi;
    row.f_z_Hz = sol.spectrum["z"].omega / kTwoPi;
    row.f_theta_Hz = sol.spectrum["theta"].omega / kTwoPi;
    row.f_phi_Hz = sol.spectrum["phi"].omega / kTwoPi;

    const double omega = sol.spectrum[s.nv.coupling_mode].omega;
    const auto g = gradient_coupling(s.magnet, probe, mode_direction(s.nv.coupling_mode),
                                     omega, s.constants);
    row.x_zp_m = g.x_zp;
    row.f_g = g.f_g;
    row.lambda_g_Hz = g.lambda_g / kTwoPi;
    row.cooperativity =
        cooperativity(g.lambda_g, row.Q, row.T2_s, row.temperature_K, s.constants);
  } catch (const InfeasibleError& e) {
    row.status = "infeasible";
    row.message = e.what();
  } catch (const DomainError& e) {
    row.status = "error";
    row.message = e.what();
  }
  return row;
}

inline std::vector<std::string> derived_header() {
  return {"index",        "status",       "radius_m",     "cooldown_height_m",
          "h_lev_m",      "h_norm",       "f_x_Hz",       "f_y_Hz",
          "f_z_Hz",       "f_theta_Hz",   "f_phi_Hz",     "coupling_mode",
          "x_zp_m",       "r_prime_m",    "gap_m",        "f_g",
          "lambda_g_Hz",  "f_dp",         "lambda_dp_Hz", "lambda_dp_prefactor_Hz", "omega_l_Hz",
          "Q",            "temperature_K", "T2_s",        "B0_T",
          "gamma_th_Hz",  "cooperativity", "message"};
}

inline std::vector<std::string> derived_cells(std::size_t index, const DerivedRow& r) {
  auto f = format_double;
  return {std::to_string(index), r.status,  f(r.radius_m),  f(r.cooldown_height_m),
          f(r.h_lev_m),          f(r.h_norm), f(r.f_x_Hz),  f(r.f_y_Hz),
          f(r.f_z_Hz),           f(r.f_theta_Hz), f(r.f_phi_Hz), r.coupling_mode,
          f(r.x_zp_m),           f(r.r_prime_m), f(r.gap_m), f(r.f_g),
          f(r.lambda_g_Hz),      f(r.f_dp),  f(r.lambda_dp_Hz), f(r.lambda_dp_prefactor_Hz), f(r.omega_l_Hz),
          f(r.Q),                f(r.temperature_K), f(r.T2_s), f(r.B0_T),
          f(r.gamma_th_Hz),      f(r.cooperativity), r.message};
}

inline Json derived_json(const DerivedRow& r) {
  const auto n = json_number;
  return {{"status", r.status},
          {"message", r.message},
          {"radius_m", n(r.radius_m)},
          {"cooldown_height_m", n(r.cooldown_height_m)},
          {"h_lev_m", n(r.h_lev_m)},
          {"h_norm", n(r.h_norm)},
          {"frequencies_Hz",
           {{"x", n(r.f_x_Hz)}, {"y", n(r.f_y_Hz)}, {"z", n(r.f_z_Hz)},
            {"theta", n(r.f_theta_Hz)}, {"phi", n(r.f_phi_Hz)}}},
          {"coupling_mode", r.coupling_mode},
          {"x_zp_m", n(r.x_zp_m)},
          {"r_prime_m", n(r.r_prime_m)},
          {"gap_m", n(r.gap_m)},
          {"f_g", n(r.f_g)},
          {"lambda_g_Hz", n(r.lambda_g_Hz)},
          {"f_dp", n(r.f_dp)},
          {"lambda_dp_Hz", n(r.lambda_dp_Hz)},
          {"lambda_dp_prefactor_Hz", n(r.lambda_dp_prefactor_Hz)},
          {"omega_l_Hz", n(r.omega_l_Hz)},
          {"Q", n(r.Q)},
          {"temperature_K", n(r.temperature_K)},
          {"T2_s", n(r.T2_s)},
          {"B0_T", n(r.B0_T)},
          {"gamma_th_Hz", n(r.gamma_th_Hz)},
          {"cooperativity", n(r.cooperativity)}};
}

inline CsvTable derived_table(const std::vector<DerivedRow>& rows) {
  CsvTable t{derived_header(), {}};
  for (std::size_t i = 0; i < rows.size(); ++i) t.add_row(derived_cells(i, rows[i]));
  return t;
}

// ---------------------------------------------------------------------------
// Design report

struct DesignInputs {
  Magnet magnet;
  double gap = 0;         // m, NV to magnet surface
  double Q = 0;
  double temperature = 0; // K
  double T2 = 0;          // s
  double B0 = 0;          // T
  double alpha = 15e3 * 1e-6; // Hz m, omega / 2 pi = alpha a^-n
  double n = 1;
  std::optional<double> lambda_override; // rad/s
  PhysicalConstants constants{};
};

struct DesignReport {
  double radius = 0, gap = 0, r_prime = 0;
  double omega_mode = 0; // rad/s
  double x_zp = 0;
  double lambda_g = 0;  // rad/s
  double lambda_dp = 0; // rad/s
  double omega_l = 0;   // rad/s
  double gamma_th = 0;  // rad/s
  double cooperativity = 0;
  double optimal_radius = 0; // for this gap and exponent
  bool high_cooperativity = false;
  bool strong_coupling = false;
  bool ultra_strong = false;
};

/// Couplings at f_g = f_dp = 1 with the NV a distance `gap` from the magnet
/// surface, the mode frequency from the scaling ansatz, and the regime flags.
inline DesignReport design_report(const DesignInputs& in) {
  in.magnet.validate();
  in.constants.validate();
  if (!(in.gap > 0 && in.Q > 0 && in.temperature > 0 && in.T2 > 0 && in.B0 >= 0))
    throw DomainError("design report needs positive gap, Q, T, T2 and B0 >= 0");
  const auto& c = in.constants;
  DesignReport r;
  r.radius = in.magnet.radius;
  r.gap = in.gap;
  r.r_prime = in.magnet.radius + in.gap;
  r.omega_mode = scaled_mode_omega(in.alpha, in.n, in.magnet.radius);
  r.x_zp = zero_point_motion(in.magnet.mass(), r.omega_mode, c);
  r.lambda_g = in.lambda_override
                   ? *in.lambda_override
                   : gradient_coupling_prefactor(in.magnet.magnetization, in.magnet.radius,
                                                 r.r_prime, r.x_zp, c);
  const double m_zp = magnon_zero_point(in.magnet.magnetization, in.magnet.volume(), c);
  r.lambda_dp = c.gamma_e * c.mu0 * m_zp * std::pow(in.magnet.radius / r.r_prime, 3);
  r.omega_l = libration_frequencies(in.magnet, in.B0, c).omega_libration;
  r.gamma_th = thermal_decoherence(in.temperature, in.Q, c);
  r.cooperativity = cooperativity(r.lambda_g, in.Q, in.T2, in.temperature, c);
  r.optimal_radius = optimal_radius(in.n, in.gap, in.alpha, in.magnet.mass_density,
                                    in.magnet.magnetization, c)
                         .radius;
  r.high_cooperativity = r.cooperativity > 1;
  r.strong_coupling = r.lambda_g > kTwoPi / in.T2 && r.lambda_g > r.gamma_th;
  r.ultra_strong = r.lambda_g > r.omega_mode;
  return r;
}

inline DesignInputs design_inputs(const Scenario& s) {
  DesignInputs in;
  in.magnet = s.magnet;
  in.gap = s.design.gap_m;
  in.Q = s.design.Q;
  in.temperature = s.design_temperature();
  in.T2 = s.design.T2_s;
  in.B0 = s.design.B0_T;
  in.alpha = s.design.alpha_Hz_m;
  in.n = s.design.scaling_n;
  if (s.design.lambda_g_Hz) in.lambda_override = kTwoPi * *s.design.lambda_g_Hz;
  in.constants = s.constants;
  return in;
}

inline Json design_json(const DesignInputs& in, const DesignReport& r) {
  return {{"inputs",
           {{"radius_m", in.magnet.radius},
            {"gap_m", in.gap},
            {"Q", in.Q},
            {"temperature_K", in.temperature},
            {"T2_s", in.T2},
            {"B0_T", in.B0},
            {"alpha_Hz_m", in.alpha},
            {"scaling_n", in.n},
            {"lambda_g_override_Hz",
             in.lambda_override ? Json(*in.lambda_override / kTwoPi) : Json(nullptr)}}},
          {"r_prime_m", r.r_prime},
          {"mode_frequency_Hz", r.omega_mode / kTwoPi},
          {"x_zp_m", r.x_zp},
          {"lambda_g_Hz", r.lambda_g / kTwoPi},
          {"lambda_dp_Hz", r.lambda_dp / kTwoPi},
          {"omega_l_Hz", r.omega_l / kTwoPi},
          {"gamma_th_Hz", r.gamma_th / kTwoPi},
          {"cooperativity", r.cooperativity},
          {"optimal_radius_m", r.optimal_radius},
          {"regimes",
           {{"high_cooperativity", r.high_cooperativity},
            {"strong_coupling", r.strong_coupling},
            {"ultra_strong", r.ultra_strong}}}};
}

inline std::string design_text(const DesignReport& r) {
  auto line = [](const std::string& k, const std::string& v) { return k + ": " + v + "\n"; };
  auto f = format_double;
  auto b = [](bool v) { return std::string(v ? "yes" : "no"); };
  std::string t;
  t += line("radius [m]", f(r.radius));
  t += line("gap [m]", f(r.gap));
  t += line("mode frequency [Hz]", f(r.omega_mode / kTwoPi));
  t += line("zero-point motion [m]", f(r.x_zp));
  t += line("gradient coupling lambda_g/2pi [Hz]", f(r.lambda_g / kTwoPi));
  t += line("dipole coupling lambda_dp/2pi [Hz]", f(r.lambda_dp / kTwoPi));
  t += line("libration omega_l/2pi [Hz]", f(r.omega_l / kTwoPi));
  t += line("thermal decoherence Gamma_th/2pi [Hz]", f(r.gamma_th / kTwoPi));
  t += line("cooperativity", f(r.cooperativity));
  t += line("optimal radius for this gap [m]", f(r.optimal_radius));
  t += line("high cooperativity (C > 1)", b(r.high_cooperativity));
  t += line("strong coupling", b(r.strong_coupling));
  t += line("ultra-strong coupling", b(r.ultra_strong));
  return t;
}

// ---------------------------------------------------------------------------
// Sweeps

/// Applies one value of a sweep parameter to a scenario.
inline void apply_sweep_value(Scenario& s, const std::string& p, double v) {
  if (p == "radius_m") s.magnet.radius = v;
  else if (p == "h_norm") {
    s.trap.height_is_levitation = true;
    s.trap.h_norm = v;
  } else if (p == "levitation_height_m") {
    s.trap.height_is_levitation = true;
    s.trap.h_norm.reset();
    s.trap.height_m = v;
  } else if (p == "gap_m") {
    s.nv.gap_m = v;
    s.nv.gap_over_radius.reset();
  } else if (p == "gap_over_radius") s.nv.gap_over_radius = v;
  else if (p == "B0_T") s.design.B0_T = v;
  else if (p == "Q") s.design.Q = v;
  else if (p == "temperature_K") s.design.temperature_K = v;
  else if (p == "T2_s") s.design.T2_s = v;
  else if (p == "mass_density_kg_per_m3") s.magnet.mass_density = v;
  else if (p == "mu0_magnetization_T") s.magnet.magnetization = v / s.constants.mu0;
  else throw ConfigError("unknown sweep parameter '" + p + "'");
}

/// Grid points of the cartesian product, first axis outermost.
inline std::vector<std::vector<double>> sweep_points(const SweepSpec& spec) {
  std::vector<std::vector<double>> pts{{}};
  for (const auto& ax : spec.axes) {
    if (ax.values.empty()) throw ConfigError("sweep axis '" + ax.parameter + "' is empty");
    std::vector<std::vector<double>> next;
    for (const auto& p : pts)
      for (double v : ax.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  return pts;
}

/// Runs `task(i)` for i in [0, n) on up to `threads` workers; workers pull
/// the next index from a shared counter, so load balances dynamically while
/// results stay addressed by index.
template <class Task>
void parallel_for(std::size_t n, unsigned threads, Task&& task) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct SweepResult {
  std::vector<std::string> parameters;
  std::vector<std::vector<double>> points;
  std::vector<DerivedRow> rows;
};

inline SweepResult run_sweep(const Scenario& base, const SweepSpec& spec, unsigned threads) {
  SweepResult res;
  for (const auto& ax : spec.axes) res.parameters.push_back(ax.parameter);
  res.points = sweep_points(spec);
  res.rows.resize(res.points.size());
  parallel_for(res.points.size(), threads, [&](std::size_t i) {
    Scenario s = base;
    for (std::size_t k = 0; k < spec.axes.size(); ++k)
      apply_sweep_value(s, spec.axes[k].parameter, res.points[i][k]);
    res.rows[i] = derived_row(s);
  });
  return res;
}

/// Index of the feasible row with the largest lambda_g (or -1).
inline long argmax_lambda_g(const std::vector<DerivedRow>& rows) {
  long best = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status != "ok" || !std::isfinite(rows[i].lambda_g_Hz)) continue;
    if (best < 0 || rows[i].lambda_g_Hz > rows[static_cast<std::size_t>(best)].lambda_g_Hz)
      best = static_cast<long>(i);
  }
  return best;
}

inline Json sweep_json(const SweepResult& res) {
  Json j;
  j["parameters"] = res.parameters;
  j["rows"] = Json::array();
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    Json row = {{"index", i}};
    Json grid;
    for (std::size_t k = 0; k < res.parameters.size(); ++k) grid[res.parameters[k]] = res.points[i][k];
    row["grid"] = grid;
    row["derived"] = derived_json(res.rows[i]);
    j["rows"].push_back(row);
  }
  const long best = argmax_lambda_g(res.rows);
  j["argmax_lambda_g"] = best < 0 ? Json(nullptr) : Json(best);
  std::size_t infeasible = 0;
  for (const auto& r : res.rows) infeasible += r.status != "ok";
  j["infeasible_rows"] = infeasible;
  return j;
}

} // namespace levmag::cli
