// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "levmag/measurement.hpp"
#include "levmag/spectral.hpp"
#include "test_util.hpp"

namespace levmag {
namespace {

using test::rel;

Timetrace sinusoid(double f, double amp, double dt, double duration, double phase = 0) {
  Timetrace tr;
  tr.dt = dt;
  tr.unit = "m";
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  tr.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    tr.samples[i] = amp * std::sin(kTwoPi * f * static_cast<double>(i) * dt + phase);
  return tr;
}

Timetrace zeros(double dt, double duration) { return sinusoid(1, 0, dt, duration); }

NVProbe probe(double bright = 1e5) {
  NVProbe nv;
  nv.bright_rate = bright;
  nv.bias_field = Vec3(0, 0, 1.7e-3);
  return nv;
}

TEST(Camera, IdentityProjectionWithoutNoise) {
  const double dt = 1e-3;
  const Timetrace x = sinusoid(13, 1e-6, dt, 2);
  const Timetrace y = sinusoid(29, 2e-6, dt, 2, 0.3);
  const Timetrace tr[] = {x, y, Timetrace{}};
  CameraModel cam;
  cam.frame_rate = 1.0 / dt;
  const auto [xc, yc] = camera_channel(tr, cam, 1);
  EXPECT_EQ(xc.samples, x.samples);
  EXPECT_EQ(yc.samples, y.samples);

  // Downsampling picks the nearest sample.
  cam.frame_rate = 250;
  const auto [xd, yd] = camera_channel(tr, cam, 1);
  ASSERT_EQ(xd.size(), 500u);
  for (std::size_t k = 0; k < xd.size(); ++k) EXPECT_EQ(xd.samples[k], x.samples[4 * k]);
}

TEST(Camera, ReadNoiseVariance) {
  const Timetrace z = zeros(1e-3, 200);
  const Timetrace tr[] = {z, z, z};
  CameraModel cam;
  cam.frame_rate = 1e3;
  cam.read_noise_rms = 3e-9;
  const auto [xc, yc] = camera_channel(tr, cam, 2);
  EXPECT_LT(rel(variance(xc.samples), 9e-18), 0.05);
  EXPECT_LT(rel(variance(yc.samples), 9e-18), 0.05);
}

TEST(Camera, PeaksAtModeFrequencies) {
  const double dt = 1e-4;
  const Timetrace x = sinusoid(137, 1e-7, dt, 50);
  const Timetrace y = sinusoid(211, 1e-7, dt, 50);
  const Timetrace z = sinusoid(389, 1e-7, dt, 50);
  const Timetrace tr[] = {x, y, z};
  CameraModel cam;
  cam.frame_rate = 2e3;
  cam.projection << 0.9, 0.2, 0.3, -0.1, 0.8, 0.4;
  cam.read_noise_rms = 1e-9;
  const auto [xc, yc] = camera_channel(tr, cam, 3);
  const Psd psd = welch_psd(xc, segment_for_duration(xc, 10));
  for (double f : {137.0, 211.0, 389.0})
    EXPECT_NEAR(peak_frequency(psd, f - 5, f + 5), f, psd.resolution);
}

TEST(Camera, RejectsRankDeficientProjection) {
  CameraModel cam;
  cam.projection << 1, 0, 0, 2, 0, 0;
  EXPECT_THROW(cam.validate(), ConfigError);
  const Timetrace z = zeros(1e-3, 1);
  const Timetrace tr[] = {z, z, z};
  EXPECT_THROW(camera_channel(tr, cam, 1), ConfigError);
  CameraModel fast;
  fast.frame_rate = 1e4;
  EXPECT_THROW(camera_channel(tr, fast, 1), ConfigError);
}

TEST(NvChannel, ShotNoiseFloor) {
  const NVProbe nv = probe();
  MicrowaveSetting mw;
  mw.omega_mw = nv_resonance(nv) + 1e3 * nv.linewidth; // far detuned
  const Timetrace counts = nv_photon_channel(zeros(1e-3, 400), 0, 0, nv, mw, 1e-3, 4);
  const double r = odmr_rate(nv, mw.omega_mw, nv_resonance(nv));
  EXPECT_LT(rel(mean(counts.samples), r * 1e-3), 0.01);
  EXPECT_LT(rel(variance(counts.samples), r * 1e-3), 0.02); // Poisson
  const Timetrace rate = counts_to_rate(counts);
  const Psd psd = welch_psd(rate, segment_for_duration(rate, 1));
  double avg = 0;
  std::size_t n = 0;
  for (std::size_t k = 1; k + 1 < psd.values.size(); ++k, ++n) avg += psd.values[k];
  avg /= static_cast<double>(n);
  EXPECT_LT(rel(avg, 2 * r), 0.10);
}

TEST(NvChannel, CalibrationPeakMatchesAnalyticSlope) {
  const NVProbe nv = probe();
  const double w0 = nv_resonance(nv);
  MicrowaveSetting mw;
  mw.omega_mw = steepest_slope_frequency(nv, w0);
  mw.cal_enabled = true;
  mw.cal_deviation = kTwoPi * 300e3;
  mw.cal_frequency = 7;
  const Timetrace rate = counts_to_rate(
      nv_photon_channel(zeros(1e-4, 400), 0, 0, nv, mw, 1e-3, 5));
  const Psd psd = welch_psd(rate, segment_for_duration(rate, 10));
  const VarianceEstimate v = peak_variance(psd, 6.5, 7.5);
  const double s = odmr_slope(nv, mw.omega_mw, w0);
  const double expected = s * s * mw.cal_deviation * mw.cal_deviation / 2;
  EXPECT_LT(rel(v.value, expected), 0.03);
  EXPECT_LT(rel(std::sqrt(2 * v.value) / mw.cal_deviation, std::abs(s)), 0.03);
  EXPECT_NEAR(peak_frequency(psd, 1, 50), 7.0, psd.resolution);
}

TEST(NvChannel, DoublingCouplingQuadruplesPeakPower) {
  const NVProbe nv = probe(1e6);
  const double w0 = nv_resonance(nv);
  MicrowaveSetting mw;
  mw.omega_mw = steepest_slope_frequency(nv, w0);
  const double x_zp = 1e-14;
  const double amp = 1e-9;
  const Timetrace motion = sinusoid(37, amp, 1e-4, 200);
  // Frequency shift amplitude 2 pi * 100 kHz for the base coupling.
  const double lam = kTwoPi * 100e3 * x_zp / amp;
  double power[2];
  for (int i = 0; i < 2; ++i) {
    const Timetrace rate = counts_to_rate(
        nv_photon_channel(motion, lam * (i + 1), x_zp, nv, mw, 1e-3, 6 + i));
    const Psd psd = welch_psd(rate, segment_for_duration(rate, 10));
    power[i] = peak_variance(psd, 36.5, 37.5).value;
  }
  EXPECT_NEAR(power[1] / power[0], 4.0, 0.2);
}

TEST(NvChannel, LinearityWindow) {
  const NVProbe nv = probe();
  const double w0 = nv_resonance(nv);
  const double w_mw = steepest_slope_frequency(nv, w0);
  const double s = odmr_slope(nv, w_mw, w0);
  const double r0 = odmr_rate(nv, w_mw, w0);
  for (int i = -20; i <= 20; ++i) {
    if (i == 0) continue;
    const double d = 0.1 * nv.linewidth * i / 20.0;
    const double dr = odmr_rate(nv, w_mw, w0 + d) - r0;
    EXPECT_LT(rel(dr, s * d), 0.02) << "detuning step " << i;
  }
}

TEST(Odmr, SweepShapeAndSlope) {
  const NVProbe nv = probe();
  const auto [wp, wm] = nv_transition_shift(nv.bias_field, nv.axis, nv.zero_field_splitting);
  const auto sweep = odmr_sweep(nv, nv.bias_field, wp - 5 * nv.linewidth,
                                wp + 5 * nv.linewidth, 1001);
  const auto it = std::min_element(sweep.begin(), sweep.end(),
                                   [](auto& a, auto& b) { return a.rate < b.rate; });
  EXPECT_NEAR(it->omega, wp, 1e-9 * wp);
  EXPECT_LT(rel(nv.bright_rate - it->rate, nv.contrast * nv.bright_rate), 1e-12);

  // Numerical slope at half maximum vs the analytic derivative.
  const double w = wp + nv.linewidth;
  const double h = 1e-4 * nv.linewidth;
  const auto fd = odmr_sweep(nv, nv.bias_field, w - h, w + h, 3);
  const double num = (fd[2].rate - fd[0].rate) / (2 * h);
  // The sweep varies omega_mw; odmr_slope is the derivative in omega_nv.
  EXPECT_LT(rel(num, -odmr_slope(nv, w, wp)), 1e-3);
  EXPECT_THROW(odmr_sweep(nv, nv.bias_field, 1, 2, 2), ConfigError);
}

TEST(Odmr, SteepestSlopeIsExtremal) {
  const NVProbe nv = probe();
  const double w0 = nv_resonance(nv);
  const double ws = steepest_slope_frequency(nv, w0);
  const double s = std::abs(odmr_slope(nv, ws, w0));
  for (double f : {0.8, 0.9, 1.1, 1.2})
    EXPECT_GT(s, std::abs(odmr_slope(nv, w0 + f * (ws - w0), w0)));
}

} // namespace
} // namespace levmag
