// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Runs the bundled fig3 coupling scenario through the full pipeline with a
// chosen seed, duration and injected coupling, returning the report.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "levmag/cli/app.hpp"

namespace levmag::test {

struct CouplingRun {
  double lambda_Hz = 0;      // recovered lambda_g / 2 pi
  double injected_Hz = 0;
  double lambda_sq_raw = 0;  // rad^2/s^2, unclamped
  double lambda_sq_sigma = 0;
  double slope_ratio = 0;    // measured / analytic ODMR slope
  int status = 0;
  cli::Json report;
};

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("levmag-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline CouplingRun run_fig3(std::uint64_t seed, double duration_s, double coupling_Hz,
                            const std::filesystem::path& dir, double psd_segment_s = 0) {
  cli::Scenario s = cli::resolve_scenario("fig3-coupling");
  s.seed = seed;
  s.simulation.duration_s = duration_s;
  s.nv_channel.coupling_Hz = coupling_Hz;
  s.traces = cli::TraceOutput::none;
  if (psd_segment_s > 0) s.analysis.psd_segment_s = psd_segment_s;
  const cli::RunResult r = cli::run_scenario(s, dir);
  const cli::Json& c = r.report["coupling_run"];
  CouplingRun out;
  out.status = r.status;
  out.injected_Hz = c["injected"]["lambda_g_Hz"].get<double>();
  const cli::Json& cp = c["coupling"];
  if (cp.contains("lambda_g_Hz")) {
    out.lambda_Hz = cp["lambda_g_Hz"].get<double>();
    out.lambda_sq_raw = cp["lambda_squared_raw"].get<double>();
    out.lambda_sq_sigma = cp["lambda_squared_sigma"].get<double>();
  }
  if (c["calibration"].contains("slope_ratio"))
    out.slope_ratio = c["calibration"]["slope_ratio"].get<double>();
  out.report = r.report;
  return out;
}

} // namespace levmag::test
