// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stochastic time-domain simulation of independent harmonic modes in a
// thermal bath, driven by band-limited noise or tones.
//
// Each step uses the exact Gaussian propagator of the underdamped Langevin
// equation
//   dx = v dt,  dv = (-omega^2 x - gamma v + F(t)/m) dt + sqrt(2 gamma kB T/m) dW,
// with the drive force held constant over the step. Mean map and noise
// covariance are exact for any dt, so stationary statistics are correct by
// construction.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "levmag/constants.hpp"
#include "levmag/errors.hpp"
#include "levmag/fft.hpp"
#include "levmag/timetrace.hpp"

namespace levmag {

struct ModeConfig {
  double omega = 0;    // rad/s
  double Q = 0;        // gamma = omega / Q
  double mass_eff = 0; // kg
  std::string label = "x";

  double damping() const { return omega / Q; }

  void validate() const {
    if (!(omega > 0) || !(Q > 0) || !(mass_eff > 0))
      throw ConfigError("mode '" + label + "' needs omega, Q and mass > 0");
    if (label != "x" && label != "y" && label != "z" && label != "libration")
      throw ConfigError("mode label must be one of x, y, z, libration");
  }
};

enum class DriveKind { none, broadband, tone, ringdown_schedule };

struct DriveSpec {
  DriveKind kind = DriveKind::none;
  double band_lo = 0;        // Hz
  double band_hi = 0;        // Hz
  double force_psd = 0;      // one-sided, N^2/Hz
  double tone_frequency = 0; // Hz
  double tone_amplitude = 0; // N
  double drive_on = 0;       // s
  double drive_off = std::numeric_limits<double>::infinity(); // s

  static DriveSpec broadband(double f_lo, double f_hi, double psd) {
    DriveSpec d;
    d.kind = DriveKind::broadband;
    d.band_lo = f_lo;
    d.band_hi = f_hi;
    d.force_psd = psd;
    return d;
  }
  static DriveSpec tone(double frequency, double amplitude,
                        double on = 0,
                        double off = std::numeric_limits<double>::infinity()) {
    DriveSpec d;
    d.kind = DriveKind::tone;
    d.tone_frequency = frequency;
    d.tone_amplitude = amplitude;
    d.drive_on = on;
    d.drive_off = off;
    return d;
  }

  bool in_band(double f) const { return f >= band_lo && f <= band_hi; }

  void validate() const {
    switch (kind) {
      case DriveKind::none:
        break;
      case DriveKind::broadband:
        if (!(band_lo >= 0 && band_lo < band_hi))
          throw ConfigError("broadband drive needs 0 <= f_lo < f_hi");
        if (!(force_psd >= 0)) throw ConfigError("force PSD must be >= 0");
        break;
      case DriveKind::tone:
      case DriveKind::ringdown_schedule:
        if (!(tone_amplitude >= 0)) throw ConfigError("tone amplitude must be >= 0");
        if (!(tone_frequency >= 0)) throw ConfigError("tone frequency must be >= 0");
        if (!(drive_on <= drive_off)) throw ConfigError("drive schedule reversed");
        break;
    }
  }
};

/// Exact one-step propagator for one mode at fixed dt.
class LangevinPropagator {
 public:
  LangevinPropagator(const ModeConfig& mode, double temperature, double dt,
                     const PhysicalConstants& c = {})
      : mass_(mode.mass_eff) {
    mode.validate();
    if (!(dt > 0)) throw ConfigError("dt must be > 0");
    if (!(temperature >= 0)) throw ConfigError("bath temperature must be >= 0");
    const double w2 = mode.omega * mode.omega;
    const double g = mode.damping();
    const double s = w2 - 0.25 * g * g;
    double cs = 1;
    double sn = dt;
    if (s > 0) {
      const double wd = std::sqrt(s);
      cs = std::cos(wd * dt);
      sn = std::sin(wd * dt) / wd;
    } else if (s < 0) {
      const double wd = std::sqrt(-s);
      cs = std::cosh(wd * dt);
      sn = std::sinh(wd * dt) / wd;
    }
    const double e = std::exp(-0.5 * g * dt);
    // Phi = e^{-g dt/2} [cs I + sn (A + g/2 I)], A = [[0, 1], [-w2, -g]]
    p00_ = e * (cs + sn * 0.5 * g);
    p01_ = e * sn;
    p10_ = -e * sn * w2;
    p11_ = e * (cs - sn * 0.5 * g);
    // Zero-order-hold force response: A^{-1} (Phi - I) (0, 1/m)^T
    b0_ = (-g * p01_ - (p11_ - 1.0)) / w2 / mass_;
    b1_ = p01_ / mass_;
    // Noise covariance Sigma = P - Phi P Phi^T, P = kT diag(1/(m w2), 1/m)
    const double kt = c.kB * temperature;
    const double px = kt / (mass_ * w2);
    const double pv = kt / mass_;
    const double s00 = px - (p00_ * p00_ * px + p01_ * p01_ * pv);
    const double s01 = -(p00_ * p10_ * px + p01_ * p11_ * pv);
    const double s11 = pv - (p10_ * p10_ * px + p11_ * p11_ * pv);
    l00_ = std::sqrt(std::max(0.0, s00));
    l10_ = l00_ > 0 ? s01 / l00_ : 0.0;
    l11_ = std::sqrt(std::max(0.0, s11 - l10_ * l10_));
  }

  /// Advances (x, v) by one step under constant force `f` with standard
  /// normal draws xi0, xi1.
  void step(double& x, double& v, double f, double xi0, double xi1) const {
    const double nx = p00_ * x + p01_ * v + b0_ * f + l00_ * xi0;
    const double nv = p10_ * x + p11_ * v + b1_ * f + l10_ * xi0 + l11_ * xi1;
    x = nx;
    v = nv;
  }

  bool noiseless() const { return l00_ == 0 && l11_ == 0; }

 private:
  double mass_;
  double p00_, p01_, p10_, p11_;
  double b0_, b1_;
  double l00_, l10_, l11_;
};

namespace detail {

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

/// Gaussian force noise with flat one-sided PSD inside [f_lo, f_hi],
/// synthesized segment by segment from random spectral amplitudes.
class BandLimitedNoise {
 public:
  BandLimitedNoise(const DriveSpec& spec, double dt, std::size_t total_samples,
                   std::mt19937_64& rng)
      : spec_(spec), dt_(dt), rng_(rng) {
    std::size_t n = 1u << 16;
    while (n > 256 && n / 2 >= total_samples) n /= 2;
    fft_.emplace(n);
    pos_ = n;
  }

  double next() {
    if (pos_ == fft_->size()) refill();
    return fft_->real()[pos_++];
  }

 private:
  void refill() {
    const std::size_t n = fft_->size();
    const double df = 1.0 / (static_cast<double>(n) * dt_);
    const double amp = 0.5 * std::sqrt(spec_.force_psd * df);
    auto spec = fft_->spectrum();
    std::normal_distribution<double> normal;
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double f = static_cast<double>(k) * df;
      if (k == 0 || k == n / 2 || !spec_.in_band(f)) {
        spec[k] = 0;
        continue;
      }
      const double a = normal(rng_);
      const double b = normal(rng_);
      spec[k] = {amp * a, -amp * b};
    }
    fft_->backward();
    pos_ = 0;
  }

  DriveSpec spec_;
  double dt_;
  std::mt19937_64& rng_;
  std::optional<RealFft> fft_;
  std::size_t pos_ = 0;
};

} // namespace detail

/// Temperature the mode equilibrates to under bath plus in-band broadband
/// drive: T + S_F / (4 m gamma kB).
inline double effective_temperature(const ModeConfig& mode, double bath_temperature,
                                    const DriveSpec& drive,
                                    const PhysicalConstants& c = {}) {
  double t = bath_temperature;
  if (drive.kind == DriveKind::broadband && drive.in_band(mode.omega / kTwoPi))
    t += drive.force_psd / (4.0 * mode.mass_eff * mode.damping() * c.kB);
  return t;
}

struct SimulateOptions {
  /// Draw the initial state from the stationary distribution at the mode's
  /// effective temperature; otherwise start at rest at the origin.
  bool thermal_start = true;
  PhysicalConstants constants{};
};

/// Largest admissible step: 5% of the shortest period.
inline double max_stable_dt(std::span<const ModeConfig> modes) {
  double w = 0;
  for (const auto& m : modes) w = std::max(w, m.omega);
  return 0.05 * kTwoPi / w;
}

/// Default sampling: 50 points per period of the fastest mode.
inline double default_dt(std::span<const ModeConfig> modes) {
  return max_stable_dt(modes) * 20.0 / 50.0;
}

namespace detail {

inline Timetrace run_mode(const ModeConfig& mode, double bath_temperature,
                          const DriveSpec& drive, double t_start,
                          std::size_t n_samples, double dt, std::uint64_t seed,
                          std::uint64_t stream, double x0, double v0,
                          bool thermal_start, const PhysicalConstants& c) {
  Timetrace tr;
  tr.dt = dt;
  tr.t0 = t_start;
  tr.unit = mode.label == "libration" ? "rad" : "m";
  tr.seed = seed;
  tr.samples.resize(n_samples);

  auto noise_rng = make_engine(seed, stream, 0);
  auto drive_rng = make_engine(seed, stream, 1);
  std::normal_distribution<double> normal;
  const LangevinPropagator prop(mode, bath_temperature, dt, c);

  double x = x0;
  double v = v0;
  if (thermal_start) {
    const double t_eff = effective_temperature(mode, bath_temperature, drive, c);
    const double kt = c.kB * t_eff;
    x = std::sqrt(kt / (mode.mass_eff * mode.omega * mode.omega)) * normal(noise_rng);
    v = std::sqrt(kt / mode.mass_eff) * normal(noise_rng);
  }

  std::optional<BandLimitedNoise> band;
  if (drive.kind == DriveKind::broadband && drive.force_psd > 0)
    band.emplace(drive, dt, n_samples, drive_rng);
  const bool tone = (drive.kind == DriveKind::tone ||
                     drive.kind == DriveKind::ringdown_schedule) &&
                    drive.tone_amplitude > 0;
  const double w_tone = kTwoPi * drive.tone_frequency;
  const bool noisy = !prop.noiseless();

  for (std::size_t i = 0; i < n_samples; ++i) {
    tr.samples[i] = x;
    double f = 0;
    if (band) f = band->next();
    if (tone) {
      const double tm = t_start + (static_cast<double>(i) + 0.5) * dt;
      if (tm >= drive.drive_on && tm < drive.drive_off)
        f += drive.tone_amplitude * std::cos(w_tone * tm);
    }
    double xi0 = 0;
    double xi1 = 0;
    if (noisy) {
      xi0 = normal(noise_rng);
      xi1 = normal(noise_rng);
    }
    prop.step(x, v, f, xi0, xi1);
  }
  return tr;
}

} // namespace detail

/// Simulates each mode independently; returns one position trace per mode.
///
/// Throws ConfigError (before stepping) if dt violates the sampling bound
/// dt < 0.05 * 2 pi / omega_max or any mode/drive is invalid.
inline std::vector<Timetrace> simulate(std::span<const ModeConfig> modes,
                                       double bath_temperature,
                                       std::span<const DriveSpec> drives,
                                       double duration, double dt,
                                       std::uint64_t seed,
                                       const SimulateOptions& opts = {}) {
  if (modes.empty()) throw ConfigError("no modes to simulate");
  if (drives.size() != modes.size())
    throw ConfigError("one drive spec per mode is required");
  for (const auto& m : modes) m.validate();
  for (const auto& d : drives) d.validate();
  if (!(bath_temperature >= 0)) throw ConfigError("bath temperature must be >= 0");
  if (!(dt > 0) || !(dt < max_stable_dt(modes)))
    throw ConfigError("dt must be positive and below 5% of the shortest period");
  if (!(duration > 0)) throw ConfigError("duration must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  if (n < 2) throw ConfigError("duration shorter than two samples");

  std::vector<Timetrace> out;
  out.reserve(modes.size());
  for (std::size_t k = 0; k < modes.size(); ++k)
    out.push_back(detail::run_mode(modes[k], bath_temperature, drives[k], 0.0, n,
                                   dt, seed, k, 0.0, 0.0, opts.thermal_start,
                                   opts.constants));
  return out;
}

/// Resonant tone during [0, t_on], then free decay over (t_on, t_on + t_off].
/// Only the free-decay section is returned (t0 = t_on).
inline Timetrace ringdown(const ModeConfig& mode, double drive_amplitude,
                          double t_on, double t_off, double bath_temperature,
                          double dt, std::uint64_t seed,
                          const PhysicalConstants& c = {}) {
  mode.validate();
  if (!(drive_amplitude >= 0)) throw ConfigError("drive amplitude must be >= 0");
  if (!(t_on >= 5.0 * mode.Q / mode.omega))
    throw ConfigError("t_on must be >= 5 Q / omega to reach steady drive amplitude");
  if (!(t_off > 0)) throw ConfigError("t_off must be > 0");
  const ModeConfig one[] = {mode};
  if (!(dt > 0) || !(dt < max_stable_dt(one)))
    throw ConfigError("dt must be positive and below 5% of the period");
  if (!(bath_temperature >= 0)) throw ConfigError("bath temperature must be >= 0");

  DriveSpec drive = DriveSpec::tone(mode.omega / kTwoPi, drive_amplitude, 0.0, t_on);
  drive.kind = DriveKind::ringdown_schedule;
  drive.validate();
  const auto n_on = static_cast<std::size_t>(std::llround(t_on / dt));
  const auto n_off = static_cast<std::size_t>(std::llround(t_off / dt));
  if (n_off < 2) throw ConfigError("t_off shorter than two samples");

  // Drive phase, advanced sample by sample but not stored.
  auto noise_rng = detail::make_engine(seed, 0, 0);
  std::normal_distribution<double> normal;
  const LangevinPropagator prop(mode, bath_temperature, dt, c);
  const double kt = c.kB * bath_temperature;
  double x = std::sqrt(kt / (mode.mass_eff * mode.omega * mode.omega)) * normal(noise_rng);
  double v = std::sqrt(kt / mode.mass_eff) * normal(noise_rng);
  const bool noisy = !prop.noiseless();
  for (std::size_t i = 0; i < n_on; ++i) {
    const double tm = (static_cast<double>(i) + 0.5) * dt;
    const double f = drive_amplitude * std::cos(mode.omega * tm);
    double xi0 = 0;
    double xi1 = 0;
    if (noisy) {
      xi0 = normal(noise_rng);
      xi1 = normal(noise_rng);
    }
    prop.step(x, v, f, xi0, xi1);
  }
  DriveSpec none;
  return detail::run_mode(mode, bath_temperature, none,
                          static_cast<double>(n_on) * dt, n_off, dt, seed, 1, x,
                          v, false, c);
}

} // namespace levmag
