// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Spin-mechanical coupling from measured variances: ODMR slope from a
// calibration tone, then lambda_g = x_zp sqrt((<c_NV^2> / s^2) / <x^2>).
#pragma once

#include <cmath>

#include "levmag/errors.hpp"
#include "levmag/spectral.hpp"

namespace levmag {

/// s = sqrt(<c_cal^2> / <dw_cal^2>) with <dw_cal^2> = dw_cal^2 / 2.
inline double slope_from_calibration(const VarianceEstimate& var_cal,
                                     double delta_omega_cal) {
  if (!(delta_omega_cal > 0)) throw DomainError("calibration deviation must be > 0");
  if (!(var_cal.value > 0)) throw CalibrationError("calibration peak has zero variance");
  return std::sqrt(var_cal.value / (0.5 * delta_omega_cal * delta_omega_cal));
}

struct CouplingEstimate {
  double lambda_g = 0; // rad/s
  /// lambda_g^2 from the unclamped NV variance and its one-sigma error, for
  /// null tests where the clamped estimate sits at zero.
  double lambda_squared_raw = 0;
  double lambda_squared_sigma = 0;
  double lambda_sigma = 0; // one-sigma error of lambda_g (0 when lambda_g = 0)
};

/// lambda_g = x_zp sqrt((<c_NV^2> / s^2) / <x^2>).
///
/// A clamped (zero) NV variance yields lambda_g = 0 rather than an error so
/// that null-coupling runs still report an estimate.
inline CouplingEstimate extract_coupling(const VarianceEstimate& var_nv, double s,
                                         const VarianceEstimate& var_x, double x_zp) {
  if (!(s > 0)) throw DomainError("ODMR slope must be > 0");
  if (!(x_zp > 0)) throw DomainError("x_zp must be > 0");
  if (!(var_x.value > 0)) throw DomainError("position variance must be > 0");
  if (!(var_nv.value >= 0)) throw DomainError("NV variance must be >= 0");
  if (var_nv.value == 0 && !var_nv.clamped)
    throw DomainError("NV variance must be > 0");
  CouplingEstimate out;
  const double k = x_zp * x_zp / (s * s * var_x.value);
  out.lambda_g = std::sqrt(k * var_nv.value);
  out.lambda_squared_raw = k * var_nv.raw_value;
  out.lambda_squared_sigma = k * var_nv.uncertainty;
  if (out.lambda_g > 0) {
    const double rel_nv = var_nv.uncertainty / var_nv.value;
    const double rel_x = var_x.uncertainty / var_x.value;
    out.lambda_sigma = 0.5 * out.lambda_g * std::sqrt(rel_nv * rel_nv + rel_x * rel_x);
  }
  return out;
}

} // namespace levmag
