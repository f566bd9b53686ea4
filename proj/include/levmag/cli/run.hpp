// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scenario execution: trap -> simulate -> measure -> analyze, writing every
// intermediate product into an output bundle.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "levmag/cli/derived.hpp"
#include "levmag/cli/io.hpp"
#include "levmag/cli/reference.hpp"
#include "levmag/cli/scenario.hpp"
#include "levmag/coupling_analysis.hpp"
#include "levmag/dynamics.hpp"
#include "levmag/fitting.hpp"
#include "levmag/measurement.hpp"
#include "levmag/spectral.hpp"
#include "levmag/statistics.hpp"

namespace levmag::cli {

/// Exit status of a run: 0 ok, 4 when a required fit failed to converge.
struct RunResult {
  Json report;
  int status = 0;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitAnalysis = 4;

/// Resolved simulation parameters of one mode.
inline ModeConfig mode_config(const Scenario& s, const std::string& label,
                              const std::optional<TrapSolution>& trap) {
  ModeConfig m;
  m.label = label;
  const ModeOverride* o = s.mode(label);
  m.Q = o ? o->Q : 1e6;
  if (o && o->frequency_Hz) {
    m.omega = kTwoPi * *o->frequency_Hz;
  } else {
    if (!trap) throw InfeasibleError("mode '" + label + "' needs a trap frequency, but the trap is infeasible");
    m.omega = trap->spectrum[label == "libration" ? "theta" : label].omega;
  }
  if (o && o->mass_kg) m.mass_eff = *o->mass_kg;
  else m.mass_eff = label == "libration" ? s.magnet.moment_of_inertia() : s.magnet.mass();
  m.validate();
  return m;
}

/// Drive for a mode; an effective temperature is converted to a force PSD.
inline DriveSpec drive_for(const Scenario& s, const ModeConfig& m) {
  const DriveEntry* d = s.drive(m.label);
  if (!d) return {};
  DriveSpec spec = d->spec;
  if (d->effective_temperature_K) {
    const double excess = *d->effective_temperature_K - s.simulation.temperature_K;
    if (excess < 0)
      throw ConfigError("drive for mode '" + m.label +
                        "': effective temperature below the bath temperature");
    if (!spec.in_band(m.omega / kTwoPi))
      throw ConfigError("drive for mode '" + m.label + "': band misses the mode frequency");
    spec.force_psd = excess * 4.0 * m.mass_eff * m.damping() * s.constants.kB;
  }
  return spec;
}

inline std::optional<TrapSolution> try_solve_trap(const Scenario& s) {
  try {
    return solve_trap(s);
  } catch (const InfeasibleError&) {
    return std::nullopt;
  }
}

inline Json fit_json(const FitResult& f) {
  Json p, e;
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    p[f.names[i]] = json_number(f.params[i]);
    e[f.names[i]] = json_number(f.errors[i]);
  }
  return {{"params", p},
          {"errors", e},
          {"residual_norm", json_number(f.residual_norm)},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"informative", f.informative},
          {"message", f.message}};
}

inline Json variance_json(const VarianceEstimate& v) {
  return {{"band_Hz", Json::array({v.band_lo, v.band_hi})},
          {"value", v.value},
          {"raw_value", v.raw_value},
          {"floor_psd", v.floor},
          {"uncertainty", v.uncertainty},
          {"clamped", v.clamped},
          {"bins", v.bins}};
}

inline CsvTable psd_table(const Psd& psd) {
  CsvTable t{{"frequency_Hz", "psd_" + (psd.unit.empty() ? std::string("1") : psd.unit) + "2_per_Hz"}, {}};
  t.rows.reserve(psd.values.size());
  for (std::size_t k = 0; k < psd.values.size(); ++k)
    t.rows.push_back({format_double(psd.frequencies[k]), format_double(psd.values[k])});
  return t;
}

inline Json psd_json(const Psd& psd, const Timetrace& trace) {
  const double var = variance(trace.samples);
  return {{"resolution_Hz", psd.resolution},
          {"segment_len", psd.segment_len},
          {"segments", psd.segments},
          {"overlap", psd.overlap},
          {"window", to_string(psd.window)},
          {"integral", psd.integral()},
          {"windowed_variance", psd.windowed_variance},
          {"parseval_ratio", json_number(psd.integral() / psd.windowed_variance)},
          {"trace_variance", var},
          {"integral_over_trace_variance", json_number(psd.integral() / var)}};
}

/// Energy-window statistics; failures are reported, not thrown.
inline Json energy_statistics(const Timetrace& trace, double f_center, const AnalysisSpec& a,
                              std::vector<double>* energies_out = nullptr) {
  Json j;
  try {
    const auto e = energy_windows(
        trace, a.energy_window_s, a.energy_stride_s,
        std::make_pair(std::max(0.0, f_center - a.band_halfwidth_Hz), f_center + a.band_halfwidth_Hz));
    const auto fit = fit_exponential_distribution(e, a.ks_alpha);
    j["windows"] = e.size();
    j["mean_energy"] = mean(e);
    j["beta"] = fit.fit.params[0];
    j["beta_error"] = fit.fit.errors[0];
    j["inverse_beta"] = 1.0 / fit.fit.params[0];
    j["ks_statistic"] = fit.ks_statistic;
    j["ks_critical"] = fit.ks_critical;
    j["ks_alpha"] = fit.alpha;
    j["p_value"] = fit.p_value;
    j["exponential_accepted"] = fit.accepted;
    j["coefficient_of_variation"] = coefficient_of_variation(e);
    j["informative"] = true;
    if (energies_out) *energies_out = e;
  } catch (const std::exception& ex) {
    j["informative"] = false;
    j["message"] = ex.what();
  }
  return j;
}

inline double simulation_dt(const Scenario& s, std::span<const ModeConfig> modes) {
  const double dt = s.simulation.dt_s.value_or(default_dt(modes));
  if (!(dt < max_stable_dt(modes)))
    throw ConfigError("simulation.dt_s must be below 5% of the shortest mode period");
  return dt;
}

// ---------------------------------------------------------------------------
// Pipelines

inline RunResult run_thermal(const Scenario& s, const fs::path& out,
                             const std::optional<TrapSolution>& trap) {
  std::vector<std::string> labels;
  for (const auto& m : s.modes) labels.push_back(m.label);
  if (labels.empty()) labels = {"x", "y", "z"};
  std::vector<ModeConfig> modes;
  std::vector<DriveSpec> drives;
  for (const auto& l : labels) {
    modes.push_back(mode_config(s, l, trap));
    drives.push_back(drive_for(s, modes.back()));
  }
  const double dt = simulation_dt(s, modes);
  SimulateOptions opts;
  opts.thermal_start = s.simulation.thermal_start;
  opts.constants = s.constants;
  const auto traces = simulate(modes, s.simulation.temperature_K, drives,
                               s.simulation.duration_s, dt, s.seed, opts);

  RunResult res;
  Json modes_json = Json::array();
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const auto& m = modes[k];
    const auto& tr = traces[k];
    if (s.traces != TraceOutput::none) write_trace(out / "traces", "mode_" + m.label, tr);
    const double t_eff = effective_temperature(m, s.simulation.temperature_K, drives[k], s.constants);
    const double expected = s.constants.kB * t_eff / (m.mass_eff * m.omega * m.omega);
    const double var = variance(tr.samples);
    Json mj = {{"label", m.label},
               {"frequency_Hz", m.omega / kTwoPi},
               {"Q", m.Q},
               {"mass_kg", m.mass_eff},
               {"effective_temperature_K", t_eff},
               {"equipartition_variance", expected},
               {"trace_variance", var},
               {"variance_ratio", json_number(var / expected)}};
    const auto seg = segment_for_duration(tr, s.analysis.psd_segment_s);
    const Psd psd = welch_psd(tr, seg, s.analysis.overlap, s.analysis.window);
    write_csv(out / ("psd_" + m.label + ".csv"), psd_table(psd));
    mj["psd"] = psd_json(psd, tr);
    const double f0 = m.omega / kTwoPi;
    const double fmax = psd.frequencies.back();
    const double lo = std::max(0.0, f0 - s.analysis.band_halfwidth_Hz);
    const double hi = std::min(fmax, f0 + s.analysis.band_halfwidth_Hz);
    try {
      const auto pv = peak_variance(psd, lo, hi, s.analysis.floor, s.analysis.sideband_bins);
      mj["peak_variance"] = variance_json(pv);
      mj["peak_variance_ratio"] = json_number(pv.value / expected);
    } catch (const DomainError& e) {
      mj["peak_variance"] = {{"message", e.what()}};
    }
    std::vector<double> energies;
    mj["energy_statistics"] = energy_statistics(tr, f0, s.analysis, &energies);
    if (!energies.empty()) {
      CsvTable et{{"window", "energy"}, {}};
      for (std::size_t i = 0; i < energies.size(); ++i)
        et.add_row({std::to_string(i), format_double(energies[i])});
      write_csv(out / ("energies_" + m.label + ".csv"), et);
    }
    mj["informative"] = var > 0;
    modes_json.push_back(mj);
  }
  res.report["modes"] = modes_json;
  return res;
}

inline RunResult run_ringdown_pipeline(const Scenario& s, const fs::path& out,
                                       const std::optional<TrapSolution>& trap) {
  const ModeConfig m = mode_config(s, s.ringdown.mode, trap);
  const double t_on = s.ringdown.t_on_s.value_or(5.0 * m.Q / m.omega);
  const double t_off = s.ringdown.t_off_s.value_or(2.0 * m.Q / m.omega);
  const ModeConfig one[] = {m};
  const double dt = simulation_dt(s, one);
  const Timetrace decay = ringdown(m, s.ringdown.drive_amplitude_N, t_on, t_off,
                                   s.simulation.temperature_K, dt, s.seed, s.constants);
  if (s.traces == TraceOutput::all) write_trace(out / "traces", "ringdown_" + m.label, decay);

  RunResult res;
  const double q_guess = s.ringdown.q_guess.value_or(m.Q);
  Json j = {{"mode", m.label},
            {"frequency_Hz", m.omega / kTwoPi},
            {"Q_configured", m.Q},
            {"q_guess", q_guess},
            {"t_on_s", t_on},
            {"t_off_s", t_off},
            {"dt_s", dt}};
  try {
    const double block = std::min(1.0 / (20.0 * m.omega / q_guess), decay.duration() / 20.0);
    const Envelope env = demodulated_energy(decay, m.omega, block);
    CsvTable et{{"time_s", "energy_m2"}, {}};
    for (std::size_t i = 0; i < env.times.size(); ++i)
      et.add_row({format_double(env.times[i]), format_double(env.energies[i])});
    write_csv(out / "envelope.csv", et);
    const FitResult fit = fit_ringdown(decay, m.omega, q_guess);
    j["fit"] = fit_json(fit);
    j["Q_fit"] = json_number(fit.param("Q"));
    j["Q_relative_error"] = json_number(fit.param("Q") / m.Q - 1.0);
    j["informative"] = fit.informative;
    if (!fit.converged) res.status = kExitAnalysis;
  } catch (const DomainError& e) {
    j["informative"] = false;
    j["message"] = e.what();
  }
  j["reference"] = compare_to_reference("ringdown.Q", j.contains("Q_fit") && j["Q_fit"].is_number()
                                                          ? j["Q_fit"].get<double>()
                                                          : NAN);
  res.report["ringdown"] = j;
  return res;
}

/// Noisy ODMR sweep (Poisson counts over `integration` seconds per point).
inline std::vector<OdmrPoint> measured_odmr(const NVProbe& nv, const AnalysisSpec& a,
                                            std::uint64_t seed, const PhysicalConstants& c) {
  const double w0 = nv_resonance(nv, c);
  const double span = kTwoPi * a.odmr_span_Hz;
  auto pts = odmr_sweep(nv, nv.bias_field, w0 - 0.5 * span, w0 + 0.5 * span, a.odmr_points, c);
  if (a.odmr_integration_s > 0) {
    auto rng = levmag::detail::make_engine(seed, 1000, 4);
    std::poisson_distribution<long long> poisson;
    using param = std::poisson_distribution<long long>::param_type;
    for (auto& p : pts)
      p.rate = static_cast<double>(poisson(rng, param(p.rate * a.odmr_integration_s))) /
               a.odmr_integration_s;
  }
  return pts;
}

inline RunResult run_coupling(const Scenario& s, const fs::path& out,
                              const std::optional<TrapSolution>& trap,
                              const DerivedRow& derived) {
  RunResult res;
  const auto& a = s.analysis;
  const std::string cm = s.nv.coupling_mode;
  const NVProbe nv = s.nv_probe();

  // Simulated modes: every listed translational mode plus the coupled one.
  std::vector<std::string> labels;
  for (const auto& m : s.modes)
    if (m.label != "libration") labels.push_back(m.label);
  if (std::find(labels.begin(), labels.end(), cm) == labels.end()) labels.push_back(cm);
  std::vector<ModeConfig> modes;
  std::vector<DriveSpec> drives;
  for (const auto& l : labels) {
    modes.push_back(mode_config(s, l, trap));
    drives.push_back(drive_for(s, modes.back()));
  }
  const double dt = simulation_dt(s, modes);
  SimulateOptions opts;
  opts.thermal_start = s.simulation.thermal_start;
  opts.constants = s.constants;
  auto traces = simulate(modes, s.simulation.temperature_K, drives, s.simulation.duration_s,
                         dt, s.seed, opts);
  const auto k_cm = static_cast<std::size_t>(
      std::find(labels.begin(), labels.end(), cm) - labels.begin());
  const ModeConfig& mode = modes[k_cm];
  const double f_mode = mode.omega / kTwoPi;
  const double x_zp = zero_point_motion(mode.mass_eff, mode.omega, s.constants);
  const double t_eff =
      effective_temperature(mode, s.simulation.temperature_K, drives[k_cm], s.constants);

  // Camera.
  std::array<Timetrace, 3> lab;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const int axis = labels[k] == "x" ? 0 : labels[k] == "y" ? 1 : 2;
    lab[static_cast<std::size_t>(axis)] = traces[k];
  }
  auto [cam_x, cam_y] = camera_channel(lab, s.camera, s.seed);
  const int axis = cm == "x" ? 0 : cm == "y" ? 1 : 2;
  const int row = std::abs(s.camera.projection(0, axis)) >= std::abs(s.camera.projection(1, axis)) ? 0 : 1;
  const double weight = s.camera.projection(row, axis);
  if (weight == 0) throw ConfigError("camera projection does not see the coupled mode");
  const Timetrace& cam = row == 0 ? cam_x : cam_y;

  // NV channel, optionally seeing the mode at a shifted frequency.
  Timetrace nv_motion;
  if (s.nv_channel.frequency_offset_Hz != 0) {
    ModeConfig shifted = mode;
    shifted.omega = kTwoPi * (f_mode + s.nv_channel.frequency_offset_Hz);
    DriveSpec d = drives[k_cm];
    const ModeConfig one[] = {shifted};
    const DriveSpec dd[] = {d};
    nv_motion = simulate(one, s.simulation.temperature_K, dd, s.simulation.duration_s, dt,
                         s.seed ^ 0x9e3779b97f4a7c15ULL, opts)[0];
  } else {
    nv_motion = traces[k_cm];
  }
  const double lambda_injected =
      s.nv_channel.coupling_Hz ? kTwoPi * *s.nv_channel.coupling_Hz
                               : (std::isfinite(derived.lambda_g_Hz) ? kTwoPi * derived.lambda_g_Hz : 0.0);
  const double omega0 = nv_resonance(nv, s.constants);
  MicrowaveSetting mw;
  mw.omega_mw = s.nv_channel.microwave_detuning_Hz
                    ? omega0 + kTwoPi * *s.nv_channel.microwave_detuning_Hz
                    : steepest_slope_frequency(nv, omega0);
  mw.cal_enabled = s.nv_channel.calibration_enabled;
  mw.cal_deviation = kTwoPi * s.nv_channel.calibration_deviation_Hz;
  const double f_cal = f_mode + s.nv_channel.calibration_offset_Hz;
  mw.cal_frequency = f_cal;
  const Timetrace counts = nv_photon_channel(nv_motion, lambda_injected, x_zp, nv, mw,
                                             s.nv_channel.bin_time_s, s.seed, s.constants);
  const Timetrace rate = counts_to_rate(counts);

  if (s.traces == TraceOutput::all)
    for (std::size_t k = 0; k < labels.size(); ++k)
      write_trace(out / "traces", "mode_" + labels[k], traces[k]);
  if (s.traces != TraceOutput::none) {
    write_trace(out / "traces", "camera_x", cam_x);
    write_trace(out / "traces", "camera_y", cam_y);
    write_trace(out / "traces", "nv_counts", counts);
  }

  // Spectra.
  const Psd psd_cam = welch_psd(cam, segment_for_duration(cam, a.psd_segment_s), a.overlap, a.window);
  const Psd psd_nv = welch_psd(rate, segment_for_duration(rate, a.psd_segment_s), a.overlap, a.window);
  write_csv(out / "psd_camera.csv", psd_table(psd_cam));
  write_csv(out / "psd_nv.csv", psd_table(psd_nv));

  const double f_nv = f_mode + s.nv_channel.frequency_offset_Hz;
  const double peak_cam = peak_frequency(psd_cam, f_mode - a.peak_search_Hz, f_mode + a.peak_search_Hz);
  const double peak_nv = peak_frequency(psd_nv, f_nv - a.peak_search_Hz, f_nv + a.peak_search_Hz);
  // Both channels see the same motion, so the NV band sits at the camera peak
  // shifted by the configured offset. Centring it on the NV's own maximum
  // would bias weak or null signals upwards.
  const double nv_center = peak_cam + s.nv_channel.frequency_offset_Hz;
  const double hw = a.band_halfwidth_Hz;
  VarianceEstimate var_cam = peak_variance(psd_cam, peak_cam - hw, peak_cam + hw, a.floor, a.sideband_bins);
  const double w2 = weight * weight;
  var_cam.value /= w2;
  var_cam.raw_value /= w2;
  var_cam.uncertainty /= w2;
  var_cam.floor /= w2;
  // Undo the bin-averaging attenuation so the NV variances refer to the
  // instantaneous rate (the correction cancels in lambda_g).
  const VarianceEstimate var_nv = bin_corrected(
      peak_variance(psd_nv, nv_center - hw, nv_center + hw, a.floor, a.sideband_bins), nv_center,
      rate.dt);

  Json j;
  j["mode"] = {{"label", cm},
               {"frequency_Hz", f_mode},
               {"Q", mode.Q},
               {"mass_kg", mode.mass_eff},
               {"x_zp_m", x_zp},
               {"effective_temperature_K", t_eff},
               {"equipartition_variance_m2",
                s.constants.kB * t_eff / (mode.mass_eff * mode.omega * mode.omega)}};
  j["injected"] = {{"lambda_g_Hz", lambda_injected / kTwoPi}};
  j["camera"] = {{"peak_Hz", peak_cam}, {"variance_m2", variance_json(var_cam)},
                 {"psd", psd_json(psd_cam, cam)}};
  j["nv"] = {{"peak_Hz", peak_nv},
             {"band_center_Hz", nv_center},
             {"microwave_Hz", mw.omega_mw / kTwoPi},
             {"resonance_Hz", omega0 / kTwoPi},
             {"variance_counts2_per_s2", variance_json(var_nv)},
             {"psd", psd_json(psd_nv, rate)}};

  // Calibration and coupling.
  const double slope_analytic = std::abs(odmr_slope(nv, mw.omega_mw, omega0));
  Json cal = {{"enabled", mw.cal_enabled},
              {"frequency_Hz", f_cal},
              {"deviation_Hz", s.nv_channel.calibration_deviation_Hz},
              {"slope_analytic", slope_analytic}};
  Json coupling;
  if (mw.cal_enabled) {
    try {
      const VarianceEstimate var_cal = bin_corrected(
          peak_variance(psd_nv, f_cal - hw, f_cal + hw, a.floor, a.sideband_bins), f_cal,
          rate.dt);
      cal["variance"] = variance_json(var_cal);
      const double s_meas = slope_from_calibration(var_cal, mw.cal_deviation);
      cal["slope_measured"] = s_meas;
      cal["slope_ratio"] = s_meas / slope_analytic;
      try {
        const auto est = extract_coupling(var_nv, s_meas, var_cam, x_zp);
        coupling = {{"lambda_g_Hz", est.lambda_g / kTwoPi},
                    {"sigma_Hz", est.lambda_sigma / kTwoPi},
                    {"lambda_squared_raw", est.lambda_squared_raw},
                    {"lambda_squared_sigma", est.lambda_squared_sigma},
                    {"relative_error",
                     lambda_injected > 0 ? json_number(est.lambda_g / lambda_injected - 1.0)
                                         : Json(nullptr)},
                    {"informative", true}};
      } catch (const DomainError& e) {
        coupling = {{"informative", false}, {"message", e.what()}};
      }
    } catch (const CalibrationError& e) {
      cal["message"] = e.what();
      coupling = {{"informative", false}, {"message", e.what()}};
      res.status = kExitAnalysis;
    }
  } else {
    coupling = {{"informative", false}, {"message", "calibration tone disabled"}};
  }
  coupling["theory"] = {{"lambda_g_Hz", json_number(derived.lambda_g_Hz)},
                        {"f_g", json_number(derived.f_g)},
                        {"r_prime_m", json_number(derived.r_prime_m)}};
  coupling["reference"] = compare_to_reference(
      "coupling.lambda_g", coupling.contains("lambda_g_Hz") ? coupling["lambda_g_Hz"].get<double>() : NAN);
  j["calibration"] = cal;
  j["coupling"] = coupling;

  // Thermal character of both channels.
  std::vector<double> e_cam, e_nv;
  Timetrace cam_scaled = cam;
  for (double& v : cam_scaled.samples) v /= weight;
  j["energy_statistics"] = {{"camera", energy_statistics(cam_scaled, peak_cam, a, &e_cam)},
                            {"nv", energy_statistics(rate, nv_center, a, &e_nv)}};
  if (!e_cam.empty() && e_cam.size() == e_nv.size()) {
    CsvTable et{{"window", "camera_m2", "nv_counts2_per_s2"}, {}};
    for (std::size_t i = 0; i < e_cam.size(); ++i)
      et.add_row({std::to_string(i), format_double(e_cam[i]), format_double(e_nv[i])});
    write_csv(out / "energies.csv", et);
  }

  // ODMR spectrum and Lorentzian fit.
  const auto odmr = measured_odmr(nv, a, s.seed, s.constants);
  std::vector<double> fx, fy;
  for (const auto& p : odmr) {
    fx.push_back(p.omega / kTwoPi);
    fy.push_back(p.rate);
  }
  const FitResult lf = fit_lorentzian(fx, fy);
  CsvTable ot{{"frequency_Hz", "rate_counts_per_s", "fit_counts_per_s"}, {}};
  for (std::size_t i = 0; i < fx.size(); ++i)
    ot.add_row({format_double(fx[i]), format_double(fy[i]),
                format_double(lorentzian_model(fx[i], lf.params[0], lf.params[1], lf.params[2],
                                               lf.params[3]))});
  write_csv(out / "odmr.csv", ot);
  const double fit_slope = std::abs(lorentzian_model_slope(mw.omega_mw / kTwoPi, lf.params[0],
                                                           lf.params[1], lf.params[2])) / kTwoPi;
  j["odmr"] = {{"fit", fit_json(lf)},
               {"grid_step_Hz", (fx.back() - fx.front()) / static_cast<double>(fx.size() - 1)},
               {"center_error_Hz", lf.params[0] - omega0 / kTwoPi},
               {"steepest_slope_Hz", lf.params[0] + lf.params[1] / std::sqrt(3.0)},
               {"fitted_slope_at_mw", fit_slope}};
  if (!lf.converged) res.status = kExitAnalysis;
  res.report["coupling_run"] = j;
  return res;
}

/// Full scenario run. Writes scenario.json, derived.csv, report.json and the
/// pipeline's tables and traces under `out`.
inline RunResult run_scenario(const Scenario& s, const fs::path& out) {
  fs::create_directories(out);
  write_json(out / "scenario.json", scenario_to_json(s));
  const DerivedRow derived = derived_row(s);
  write_csv(out / "derived.csv", derived_table({derived}));
  const auto trap = try_solve_trap(s);

  RunResult res;
  switch (s.pipeline) {
    case Pipeline::thermal: res = run_thermal(s, out, trap); break;
    case Pipeline::ringdown: res = run_ringdown_pipeline(s, out, trap); break;
    case Pipeline::coupling: res = run_coupling(s, out, trap, derived); break;
  }
  Json report;
  report["scenario"] = s.name;
  report["pipeline"] = to_string(s.pipeline);
  report["seed"] = s.seed;
  report["status"] = res.status == kExitOk ? "ok" : "analysis_not_converged";
  report["derived"] = derived_json(derived);
  for (auto it = res.report.begin(); it != res.report.end(); ++it) report[it.key()] = it.value();
  res.report = report;
  write_json(out / "report.json", res.report);
  return res;
}

// ---------------------------------------------------------------------------
// Stand-alone analysis of a stored trace

struct AnalyzeOptions {
  std::optional<double> band_lo_Hz;
  std::optional<double> band_hi_Hz;
  std::optional<double> ringdown_frequency_Hz;
  std::optional<double> q_guess;
};

inline Json analyze_trace(const Timetrace& tr, const AnalysisSpec& a, const AnalyzeOptions& o,
                          const fs::path& out, int& status) {
  const Psd psd = welch_psd(tr, segment_for_duration(tr, a.psd_segment_s), a.overlap, a.window);
  write_csv(out / "psd.csv", psd_table(psd));
  Json j;
  j["samples"] = tr.size();
  j["dt_s"] = tr.dt;
  j["unit"] = tr.unit;
  j["psd"] = psd_json(psd, tr);
  double lo, hi;
  if (o.band_lo_Hz && o.band_hi_Hz) {
    lo = *o.band_lo_Hz;
    hi = *o.band_hi_Hz;
  } else {
    const double fp = peak_frequency(psd, psd.resolution, psd.frequencies.back());
    lo = std::max(0.0, fp - a.band_halfwidth_Hz);
    hi = std::min(psd.frequencies.back(), fp + a.band_halfwidth_Hz);
  }
  const double center = 0.5 * (lo + hi);
  j["peak_Hz"] = peak_frequency(psd, lo, hi);
  j["band_variance"] = variance_json(peak_variance(psd, lo, hi, a.floor, a.sideband_bins));
  j["energy_statistics"] = energy_statistics(tr, center, a);
  if (o.ringdown_frequency_Hz) {
    try {
      const FitResult fit = fit_ringdown(tr, kTwoPi * *o.ringdown_frequency_Hz,
                                         o.q_guess.value_or(1e6));
      j["ringdown"] = fit_json(fit);
      if (!fit.converged) status = kExitAnalysis;
    } catch (const DomainError& e) {
      j["ringdown"] = {{"informative", false}, {"message", e.what()}};
    }
  }
  write_json(out / "analysis.json", j);
  return j;
}

} // namespace levmag::cli
