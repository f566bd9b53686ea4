// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Measurement records derived from simulated motion: camera position traces
// and binned NV photoluminescence counts under a (frequency-modulated)
// microwave tone.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "levmag/constants.hpp"
#include "levmag/dynamics.hpp"
#include "levmag/spectral.hpp"
#include "levmag/errors.hpp"
#include "levmag/spin_coupling.hpp"
#include "levmag/timetrace.hpp"

namespace levmag {

struct CameraModel {
  double frame_rate = 2e3; // Hz
  Eigen::Matrix<double, 2, 3> projection =
      (Eigen::Matrix<double, 2, 3>() << 1, 0, 0, 0, 1, 0).finished();
  double read_noise_rms = 0; // m

  void validate() const {
    if (!(frame_rate > 0)) throw ConfigError("camera frame rate must be > 0");
    if (!projection.allFinite()) throw ConfigError("camera projection not finite");
    Eigen::FullPivLU<Eigen::Matrix<double, 2, 3>> lu(projection);
    if (lu.rank() < 2) throw ConfigError("camera projection must have rank 2");
    if (!(read_noise_rms >= 0)) throw ConfigError("read noise must be >= 0");
  }
};

struct MicrowaveSetting {
  double omega_mw = 0;        // rad/s
  double cal_deviation = 0;   // peak frequency deviation, rad/s
  double cal_frequency = 0;   // modulation rate, Hz
  bool cal_enabled = false;

  void validate() const {
    if (!(omega_mw > 0)) throw ConfigError("microwave frequency must be > 0");
    if (!(cal_deviation >= 0)) throw ConfigError("calibration deviation must be >= 0");
    if (cal_enabled && !(cal_frequency > 0))
      throw ConfigError("calibration frequency must be > 0");
  }
};

/// Unit-peak Lorentzian 1 / (1 + (detuning / hwhm)^2).
inline double lorentzian(double detuning, double hwhm) {
  const double u = detuning / hwhm;
  return 1.0 / (1.0 + u * u);
}

/// Static m_s = 0 -> +1 resonance of the probe under its bias field.
inline double nv_resonance(const NVProbe& nv, const PhysicalConstants& c = {}) {
  return nv_transition_shift(nv.bias_field, nv.axis, nv.zero_field_splitting, c).first;
}

/// Expected photon rate with the microwave at `omega_mw` and the transition
/// at `omega_nv`.
inline double odmr_rate(const NVProbe& nv, double omega_mw, double omega_nv) {
  return nv.bright_rate * (1.0 - nv.contrast * lorentzian(omega_mw - omega_nv, nv.linewidth));
}

/// d(rate)/d(omega_nv) [counts s^-1 per rad s^-1].
inline double odmr_slope(const NVProbe& nv, double omega_mw, double omega_nv) {
  const double d = omega_mw - omega_nv;
  const double l = lorentzian(d, nv.linewidth);
  // dR/dd = R0 C 2 d / h^2 L^2, and dd/domega_nv = -1
  return -nv.bright_rate * nv.contrast * 2.0 * d / (nv.linewidth * nv.linewidth) * l * l;
}

/// Microwave frequency on the steepest (upper) flank of the resonance.
inline double steepest_slope_frequency(const NVProbe& nv, double omega_nv) {
  return omega_nv + nv.linewidth / std::sqrt(3.0);
}

/// Projects lab-frame motion (x, y, z traces on a common clock) onto the
/// camera plane, resamples at the frame rate by nearest sample and adds
/// Gaussian read noise. Missing axes may be passed as empty traces.
inline std::pair<Timetrace, Timetrace> camera_channel(
    std::span<const Timetrace> traces_3d, const CameraModel& model,
    std::uint64_t seed) {
  model.validate();
  if (traces_3d.size() != 3) throw ConfigError("camera needs x, y, z traces");
  const Timetrace* ref = nullptr;
  for (const auto& t : traces_3d)
    if (!t.samples.empty()) {
      if (ref && (t.size() != ref->size() || t.dt != ref->dt))
        throw ConfigError("lab traces must share a clock");
      ref = &t;
    }
  if (!ref) throw ConfigError("camera needs at least one lab trace");
  ref->validate();
  const double frame_dt = 1.0 / model.frame_rate;
  if (frame_dt < ref->dt * (1 - 1e-12))
    throw ConfigError("camera frame interval shorter than simulation dt");

  const auto n_frames = static_cast<std::size_t>(
      std::floor((static_cast<double>(ref->size()) - 0.5) * ref->dt / frame_dt)) + 1;
  Timetrace xc;
  xc.dt = frame_dt;
  xc.t0 = ref->t0;
  xc.unit = "m";
  xc.seed = seed;
  xc.samples.resize(n_frames);
  Timetrace yc = xc;

  auto rng = detail::make_engine(seed, 0, 2);
  std::normal_distribution<double> normal;
  for (std::size_t k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) * frame_dt;
    const auto idx = std::min(ref->size() - 1,
                              static_cast<std::size_t>(std::llround(t / ref->dt)));
    Eigen::Vector3d r = Eigen::Vector3d::Zero();
    for (int a = 0; a < 3; ++a)
      if (!traces_3d[a].samples.empty()) r[a] = traces_3d[a].samples[idx];
    const Eigen::Vector2d c = model.projection * r;
    double nx = 0;
    double ny = 0;
    if (model.read_noise_rms > 0) {
      nx = model.read_noise_rms * normal(rng);
      ny = model.read_noise_rms * normal(rng);
    }
    xc.samples[k] = c[0] + nx;
    yc.samples[k] = c[1] + ny;
  }
  return {std::move(xc), std::move(yc)};
}

/// Binned NV photon counts for a magnet displacement record.
///
/// The transition follows omega_nv(t) = omega_0 + (lambda_g / x_zp) x(t) +
/// dw_cal sin(2 pi f_cal t); the expected rate is averaged over the trace
/// samples inside each bin and counts are Poisson. The bin is rounded to an
/// integer number of trace samples.
inline Timetrace nv_photon_channel(const Timetrace& trace, double lambda_g,
                                   double x_zp, const NVProbe& nv,
                                   const MicrowaveSetting& mw, double bin_time,
                                   std::uint64_t seed,
                                   const PhysicalConstants& c = {}) {
  trace.validate();
  nv.validate();
  mw.validate();
  if (!(lambda_g >= 0)) throw DomainError("coupling must be >= 0");
  if (lambda_g > 0 && !(x_zp > 0)) throw DomainError("x_zp must be > 0");
  if (!(bin_time >= trace.dt * (1 - 1e-9)))
    throw ConfigError("photon bin shorter than trace dt");
  const auto per_bin = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(bin_time / trace.dt)));
  const std::size_t n_bins = trace.size() / per_bin;
  if (n_bins < 2) throw ConfigError("trace shorter than two photon bins");

  const double omega0 = nv_resonance(nv, c);
  const double shift_per_m = lambda_g > 0 ? lambda_g / x_zp : 0.0;
  const double w_cal = kTwoPi * mw.cal_frequency;
  const double bin = static_cast<double>(per_bin) * trace.dt;

  Timetrace out;
  out.dt = bin;
  out.t0 = trace.t0;
  out.unit = "counts";
  out.seed = seed;
  out.samples.resize(n_bins);
  auto rng = detail::make_engine(seed, 0, 3);
  std::poisson_distribution<long long> poisson;
  using param = std::poisson_distribution<long long>::param_type;
  for (std::size_t b = 0; b < n_bins; ++b) {
    double rate = 0;
    for (std::size_t j = 0; j < per_bin; ++j) {
      const std::size_t i = b * per_bin + j;
      double w = omega0 + shift_per_m * trace.samples[i];
      if (mw.cal_enabled) w += mw.cal_deviation * std::sin(w_cal * trace.time(i));
      rate += odmr_rate(nv, mw.omega_mw, w);
    }
    const double expected = rate / static_cast<double>(per_bin) * bin;
    out.samples[b] = static_cast<double>(poisson(rng, param(expected)));
  }
  return out;
}

/// Power response of bin averaging at frequency f: sinc^2(pi f T_bin).
/// Dividing a binned-rate peak variance by it recovers the variance of the
/// instantaneous rate.
inline double bin_power_response(double f, double bin_time) {
  const double u = kPi * f * bin_time;
  if (u == 0) return 1.0;
  const double s = std::sin(u) / u;
  return s * s;
}

inline VarianceEstimate bin_corrected(VarianceEstimate v, double f, double bin_time) {
  const double r = bin_power_response(f, bin_time);
  v.value /= r;
  v.raw_value /= r;
  v.floor /= r;
  v.uncertainty /= r;
  return v;
}

/// Counts per bin -> counts per second.
inline Timetrace counts_to_rate(Timetrace counts) {
  const double inv = 1.0 / counts.dt;
  for (double& v : counts.samples) v *= inv;
  counts.unit = "counts/s";
  return counts;
}

struct OdmrPoint {
  double omega = 0; // rad/s
  double rate = 0;  // counts/s
};

/// Noiseless ODMR spectrum over [omega_lo, omega_hi] with the transition set
/// by `static_field`.
inline std::vector<OdmrPoint> odmr_sweep(const NVProbe& nv, const Vec3& static_field,
                                         double omega_lo, double omega_hi,
                                         std::size_t points,
                                         const PhysicalConstants& c = {}) {
  nv.validate();
  if (points < 3) throw ConfigError("ODMR sweep needs >= 3 points");
  if (!(omega_lo < omega_hi)) throw ConfigError("ODMR sweep range reversed");
  const double res =
      nv_transition_shift(static_field, nv.axis, nv.zero_field_splitting, c).first;
  std::vector<OdmrPoint> out(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double w = omega_lo + (omega_hi - omega_lo) * static_cast<double>(i) /
                                    static_cast<double>(points - 1);
    out[i] = {w, odmr_rate(nv, w, res)};
  }
  return out;
}

} // namespace levmag
