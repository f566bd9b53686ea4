// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numbers>

#include "levmag/errors.hpp"

namespace levmag {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Physical constants in SI units. Defaults are CODATA 2018 values; every
/// field can be overridden from a scenario file.
struct PhysicalConstants {
  double hbar = 1.054571817e-34;     // J s
  double kB = 1.380649e-23;          // J/K
  double mu0 = 1.25663706212e-6;     // T m/A
  double gamma_e = 1.76085963023e11; // rad s^-1 T^-1, NV electron
  double gamma_0 = 1.76085963023e11; // rad s^-1 T^-1, magnet electrons
  double g = 9.80665;                // m/s^2

  void validate() const {
    if (!(hbar > 0 && kB > 0 && mu0 > 0 && gamma_e > 0 && gamma_0 > 0 && g > 0))
      throw DomainError("physical constants must be strictly positive");
  }
};

} // namespace levmag
