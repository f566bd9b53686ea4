// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Published experimental and theoretical values of the levitated-magnet
// spin-mechanics experiment. Used only for side-by-side comparison in
// reports; never as fit priors or simulation inputs.
#pragma once

#include <span>
#include <string_view>

#include "levmag/cli/io.hpp"

namespace levmag::cli {

struct ReferenceValue {
  std::string_view key;
  double value;
  double uncertainty; // one sigma, 0 when not quoted
  std::string_view unit;
  std::string_view description;
};

inline std::span<const ReferenceValue> reference_table() {
  static constexpr ReferenceValue kTable[] = {
      {"particle1.radius", 23.2e-6, 0.7e-6, "m", "radius of particle 1"},
      {"particle1.f0_x", 2.3e3, 0.4e3, "Hz", "power-law f0, particle 1, first mode"},
      {"particle1.f0_y", 2.4e3, 0.4e3, "Hz", "power-law f0, particle 1, second mode"},
      {"particle1.f0_z", 5.6e3, 1.0e3, "Hz", "power-law f0, particle 1, third mode"},
      {"particle1.gamma_x", 1.9, 0.1, "1", "power-law exponent, particle 1, first mode"},
      {"particle1.gamma_y", 2.1, 0.1, "1", "power-law exponent, particle 1, second mode"},
      {"particle1.gamma_z", 2.0, 0.1, "1", "power-law exponent, particle 1, third mode"},
      {"particle2.radius", 15.5e-6, 0.3e-6, "m", "radius of particle 2"},
      {"particle2.f0_x", 8.8e3, 1.1e3, "Hz", "power-law f0, particle 2, first mode"},
      {"particle2.f0_y", 9.5e3, 1.1e3, "Hz", "power-law f0, particle 2, second mode"},
      {"particle2.f0_z", 25.2e3, 3.3e3, "Hz", "power-law f0, particle 2, third mode"},
      {"particle2.gamma_x", 2.1, 0.1, "1", "power-law exponent, particle 2, first mode"},
      {"particle2.gamma_y", 2.1, 0.1, "1", "power-law exponent, particle 2, second mode"},
      {"particle2.gamma_z", 2.3, 0.1, "1", "power-law exponent, particle 2, third mode"},
      {"dipole_model.gamma", 2.5, 0, "1", "frequency exponent expected from the dipole model"},
      {"ringdown.Q", 1e6, 0, "1", "order of magnitude of measured Q factors"},
      {"ringdown.f_y", 839, 0, "Hz", "mode frequency of the ringdown example"},
      {"coupling.radius", 15.1e-6, 0.1e-6, "m", "radius of the coupling-experiment magnet"},
      {"coupling.z_md", 44e-6, 5e-6, "m", "magnet to diamond distance"},
      {"coupling.x_d", 83e-6, 5e-6, "m", "NV lateral offset x"},
      {"coupling.y_d", 29e-6, 5e-6, "m", "NV lateral offset y"},
      {"coupling.r_prime", 99e-6, 5e-6, "m", "quoted magnet-NV distance"},
      {"coupling.x_zp", 24e-15, 1e-15, "m", "zero-point motion of the coupled mode"},
      {"coupling.lambda_g", 48e-3, 2e-3, "Hz", "measured gradient coupling lambda_g / 2 pi"},
      {"coupling.lambda_g_theory", 18e-3, 3e-3, "Hz", "dipole-model lambda_g / 2 pi at f_g = 1"},
      {"coupling.mw_frequency", 2.918e9, 0, "Hz", "microwave tone at the steepest ODMR slope"},
      {"design.gamma_th", 0.8e3, 0, "Hz", "Gamma_th / 2 pi at T = 4 K, Q = 1e8"},
      {"design.optimal_radius", 0.25e-6, 0, "m", "optimal radius for d = 0.25 um, n = 1"},
      {"design.lambda_g", 2.6e3, 0, "Hz", "lambda_g / 2 pi at the optimal radius"},
      {"design.lambda_dp", 0.4e3, 0, "Hz", "lambda_dp / 2 pi for a = 5 um at 5 um"},
  };
  return kTable;
}

inline const ReferenceValue& reference(std::string_view key) {
  for (const auto& r : reference_table())
    if (r.key == key) return r;
  throw std::out_of_range("no reference value '" + std::string(key) + "'");
}

inline Json reference_json(const ReferenceValue& r) {
  return {{"value", r.value}, {"uncertainty", r.uncertainty}, {"unit", std::string(r.unit)},
          {"description", std::string(r.description)}};
}

/// Compares a computed value with a reference entry.
inline Json compare_to_reference(std::string_view key, double computed) {
  const auto& r = reference(key);
  Json j = {{"reference", std::string(key)}, {"computed", json_number(computed)},
            {"published", r.value}, {"published_uncertainty", r.uncertainty},
            {"unit", std::string(r.unit)}, {"ratio", json_number(computed / r.value)}};
  return j;
}

inline CsvTable reference_csv() {
  CsvTable t{{"key", "value", "uncertainty", "unit", "description"}, {}};
  for (const auto& r : reference_table())
    t.add_row({std::string(r.key), format_double(r.value), format_double(r.uncertainty),
               std::string(r.unit), std::string(r.description)});
  return t;
}

} // namespace levmag::cli
