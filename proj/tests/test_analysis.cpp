// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coupling_harness.hpp"
#include "levmag/coupling_analysis.hpp"
#include "levmag/dynamics.hpp"
#include "levmag/fitting.hpp"
#include "levmag/measurement.hpp"
#include "levmag/spectral.hpp"
#include "levmag/statistics.hpp"
#include "test_util.hpp"

namespace levmag {
namespace {

using test::rel;

const PhysicalConstants kC;

Timetrace white_noise(double sigma, double dt, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, sigma);
  Timetrace tr;
  tr.dt = dt;
  tr.samples.resize(n);
  for (double& v : tr.samples) v = g(rng);
  return tr;
}

Timetrace sinusoid(double f, double amp, double dt, std::size_t n) {
  Timetrace tr;
  tr.dt = dt;
  tr.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    tr.samples[i] = amp * std::sin(kTwoPi * f * static_cast<double>(i) * dt + 0.4);
  return tr;
}

Timetrace thermal(double f, double q, double temp, double duration, std::uint64_t seed,
                  const DriveSpec& drive = {}) {
  const ModeConfig ms[] = {ModeConfig{kTwoPi * f, q, 1e-10, "x"}};
  const DriveSpec ds[] = {drive};
  return simulate(ms, temp, ds, duration, default_dt(ms), seed).front();
}

double equipartition(double f, double temp) {
  const double w = kTwoPi * f;
  return kC.kB * temp / (1e-10 * w * w);
}

// --- welch_psd --------------------------------------------------------------

TEST(WelchPsd, WhiteNoiseParseval) {
  const double dt = 1e-3;
  const Timetrace tr = white_noise(1.0, dt, 1 << 18, 1);
  const Psd psd = welch_psd(tr, 1024);
  EXPECT_NEAR(psd.integral(), 1.0, 0.02);
  EXPECT_LT(rel(psd.integral(), psd.windowed_variance), 0.01);
  double level = 0;
  for (std::size_t k = 1; k + 1 < psd.values.size(); ++k) level += psd.values[k];
  level /= static_cast<double>(psd.values.size() - 2);
  EXPECT_LT(rel(level, 2 * dt), 0.02);
  for (double v : psd.values) EXPECT_GE(v, 0.0);
}

TEST(WelchPsd, SinusoidPower) {
  const Timetrace tr = sinusoid(50, 3.0, 1e-3, 1 << 16);
  for (Window w : {Window::hann, Window::rectangular}) {
    const Psd psd = welch_psd(tr, 4096, 0.5, w);
    EXPECT_LT(rel(psd.integral(), 4.5), 0.01);
  }
}

TEST(WelchPsd, ThermalPeakCenter) {
  const Timetrace tr = thermal(100, 100, 4, 400, 2);
  const Psd psd = welch_psd(tr, segment_for_duration(tr, 10));
  std::vector<double> x, y;
  for (std::size_t k = 0; k < psd.values.size(); ++k)
    if (std::abs(psd.frequencies[k] - 100) < 5) {
      x.push_back(psd.frequencies[k]);
      y.push_back(psd.values[k]);
    }
  const FitResult fit = fit_lorentzian(x, y);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.param("center"), 100, psd.resolution);
  EXPECT_LT(rel(psd.integral(), psd.windowed_variance), 0.01);
}

TEST(WelchPsd, RejectsBadSegments) {
  const Timetrace tr = white_noise(1, 1e-3, 100, 3);
  EXPECT_THROW(welch_psd(tr, 4), ConfigError);
  EXPECT_THROW(welch_psd(tr, 200), ConfigError);
  EXPECT_THROW(welch_psd(tr, 16, 1.0), ConfigError);
}

// --- peak_variance ----------------------------------------------------------

TEST(PeakVariance, SinusoidNoFloor) {
  const Timetrace tr = sinusoid(50, 3.0, 1e-3, 1 << 16);
  const Psd psd = welch_psd(tr, 4096);
  const VarianceEstimate v = peak_variance(psd, 49, 51, FloorModel::none);
  EXPECT_LT(rel(v.value, 4.5), 0.01);
  EXPECT_FALSE(v.clamped);
  EXPECT_THROW(peak_variance(psd, 50.01, 50.02), DomainError);
  EXPECT_THROW(peak_variance(psd, 51, 49), DomainError);
}

TEST(PeakVariance, WhiteNoiseFloorCancels) {
  int within = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Timetrace tr = white_noise(1.0, 1e-3, 1 << 17, 100 + seed);
    const Psd psd = welch_psd(tr, 2048);
    const VarianceEstimate v = peak_variance(psd, 100, 102);
    EXPECT_GE(v.value, 0.0);
    if (std::abs(v.raw_value) < 3 * v.uncertainty) ++within;
  }
  EXPECT_GE(within, 19);
}

TEST(PeakVariance, ThermalPeakOverShotNoise) {
  const double f = 100, q = 1e3;
  Timetrace tr = thermal(f, q, 4, 2000, 4);
  const double truth = variance(tr.samples);
  const Timetrace noise = white_noise(0.3 * std::sqrt(truth), tr.dt, tr.size(), 5);
  for (std::size_t i = 0; i < tr.size(); ++i) tr.samples[i] += noise.samples[i];
  const Psd psd = welch_psd(tr, segment_for_duration(tr, 50));
  const VarianceEstimate v = peak_variance(psd, f - 5, f + 5);
  EXPECT_LT(rel(v.value, truth), 0.05);
}

// Camera-side variance from a thermal run reproduces the configured
// equipartition value.
TEST(PeakVariance, PipelineClosureAgainstEquipartition) {
  const double f = 100, q = 100;
  const Timetrace x = thermal(f, q, 4, 4000, 6);
  const Timetrace tr3[] = {x, Timetrace{}, Timetrace{}};
  CameraModel cam;
  cam.frame_rate = 2e3;
  cam.read_noise_rms = 1e-3 * std::sqrt(equipartition(f, 4));
  const auto [xc, yc] = camera_channel(tr3, cam, 7);
  const Psd psd = welch_psd(xc, segment_for_duration(xc, 10));
  EXPECT_LT(rel(psd.integral(), psd.windowed_variance), 0.01);
  const VarianceEstimate v = peak_variance(psd, f - 30, f + 30, FloorModel::none);
  EXPECT_LT(rel(v.value, equipartition(f, 4)), 0.05);
}

// --- fit_power_law ----------------------------------------------------------

TEST(PowerLawFit, ExactRecovery) {
  std::vector<double> h = test::logspace(1.2, 6, 12), f;
  for (double x : h) f.push_back(power_law_frequency(8.8e3, 2.1, x));
  const FitResult r = fit_power_law(h, f);
  EXPECT_LT(rel(r.param("f0"), 8.8e3), 1e-9);
  EXPECT_LT(rel(r.param("gamma_exp"), 2.1), 1e-9);
  EXPECT_TRUE(r.converged);
}

TEST(PowerLawFit, NoisyRecoveryAcrossSeeds) {
  const std::vector<double> h = test::logspace(1.2, 6, 12);
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 0.05);
    std::vector<double> f;
    for (double x : h) f.push_back(power_law_frequency(8.8e3, 2.1, x) * (1 + g(rng)));
    if (std::abs(fit_power_law(h, f).param("gamma_exp") - 2.1) <= 0.1) ++ok;
  }
  EXPECT_EQ(ok, 100);
}

TEST(PowerLawFit, ConstantDataAndErrors) {
  const std::vector<double> h = {1, 2, 3, 4}, f = {5, 5, 5, 5};
  const FitResult r = fit_power_law(h, f);
  EXPECT_NEAR(r.param("gamma_exp"), 0.0, 1e-12);
  EXPECT_NEAR(r.param("f0"), 5.0, 1e-12);
  const std::vector<double> bad = {1, -2, 3, 4};
  EXPECT_THROW(fit_power_law(bad, f), DomainError);
  EXPECT_THROW(fit_power_law(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DomainError);
}

// --- fit_lorentzian ---------------------------------------------------------

TEST(LorentzianFit, NoiselessDip) {
  std::vector<double> x, y;
  for (int i = 0; i <= 200; ++i) {
    x.push_back(-10 + 0.1 * i);
    y.push_back(lorentzian_model(x.back(), 0.7, 1.3, 0.3, 1.0));
  }
  const FitResult r = fit_lorentzian(x, y);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.param("center"), 0.7, 1e-8 * 1.3);
  EXPECT_LT(rel(r.param("hwhm"), 1.3), 1e-8);
  EXPECT_LT(rel(r.param("depth"), 0.3), 1e-8);
  EXPECT_LT(rel(r.param("offset"), 1.0), 1e-8);
}

TEST(LorentzianFit, OdmrDipAt2918MHz) {
  NVProbe nv;
  nv.bias_field = Vec3(0, 0, 1.7126e-3);
  const double wp = nv_resonance(nv);
  EXPECT_NEAR(wp / kTwoPi, 2.918e9, 1e5);
  const auto sweep = odmr_sweep(nv, nv.bias_field, kTwoPi * 2.87e9, kTwoPi * 2.97e9, 201);
  std::mt19937_64 rng(8);
  std::vector<double> x, y;
  for (const auto& p : sweep) {
    std::poisson_distribution<long long> pois(p.rate * 1.0);
    x.push_back(p.omega / kTwoPi);
    y.push_back(static_cast<double>(pois(rng)));
  }
  const FitResult r = fit_lorentzian(x, y);
  ASSERT_TRUE(r.converged);
  const double step = x[1] - x[0];
  EXPECT_NEAR(r.param("center"), wp / kTwoPi, step);
}

TEST(LorentzianFit, SlopeMatchesDerivative) {
  const double c = 2.918e9, w = 5e6, d = 3e4, o = 1e5;
  for (double x : {2.90e9, 2.915e9, 2.918e9 + 2.9e6, 2.93e9}) {
    const double h = 1e-3 * w;
    const double fd = (lorentzian_model(x + h, c, w, d, o) - lorentzian_model(x - h, c, w, d, o)) / (2 * h);
    const double an = lorentzian_model_slope(x, c, w, d);
    if (std::abs(an) > 0) EXPECT_LT(rel(fd, an), 1e-3);
  }
}

TEST(LorentzianFit, NonConvergenceIsReported) {
  std::vector<double> x, y;
  for (int i = 0; i <= 50; ++i) {
    x.push_back(i);
    y.push_back(lorentzian_model(i, 30, 4, 2, 5));
  }
  LmOptions opt;
  opt.max_iterations = 1;
  const FitResult r = fit_lorentzian(x, y, opt);
  EXPECT_FALSE(r.converged);
  EXPECT_THROW(fit_lorentzian(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}),
               DomainError);
}

// --- fit_ringdown -----------------------------------------------------------

Timetrace decaying(double f, double q, double duration, double dt) {
  const double w = kTwoPi * f;
  const double g = w / q;
  Timetrace tr;
  tr.dt = dt;
  const auto n = static_cast<std::size_t>(duration / dt);
  tr.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    tr.samples[i] = 1e-8 * std::exp(-0.5 * g * t) * std::cos(w * t + 0.2);
  }
  return tr;
}

TEST(RingdownFit, SyntheticDecay) {
  const FitResult r = fit_ringdown(decaying(839, 1e4, 10, 1.0 / (839 * 50)), kTwoPi * 839, 1e4);
  ASSERT_TRUE(r.converged);
  EXPECT_TRUE(r.informative);
  EXPECT_LT(rel(r.param("Q"), 1e4), 0.01);
  const FitResult half = fit_ringdown(decaying(839, 5e3, 10, 1.0 / (839 * 50)), kTwoPi * 839, 5e3);
  EXPECT_NEAR((1 / half.param("gamma")) / (1 / r.param("gamma")), 0.5, 0.01);
}

TEST(RingdownFit, ThermalTraceIsNotInformative) {
  const Timetrace tr = thermal(100, 1e3, 4, 5, 9);
  const FitResult r = fit_ringdown(tr, kTwoPi * 100, 1e3);
  EXPECT_FALSE(r.informative);
}

TEST(RingdownFit, ZeroEnvelopeThrows) {
  Timetrace tr;
  tr.dt = 1e-3;
  tr.samples.assign(10000, 0.0);
  EXPECT_THROW(fit_ringdown(tr, kTwoPi * 50, 100), DomainError);
}

// --- energy windows and exponential statistics -------------------------------

TEST(EnergyWindows, SinusoidIsConcentratedAndRejected) {
  const Timetrace tr = sinusoid(50, 1.0, 1e-3, 200000);
  const auto e = energy_windows(tr, 0.5, 2.0, std::pair{45.0, 55.0});
  EXPECT_LT(coefficient_of_variation(e), 0.1);
  EXPECT_FALSE(fit_exponential_distribution(e).accepted);
  EXPECT_THROW(energy_windows(tr, 0.5, 100.0), StatisticsError);
}

TEST(EnergyWindows, ThermalMeanMatchesPeakVariance) {
  const double f = 50, q = 500, t_eff = 1e3;
  const double m = 1e-10, g = kTwoPi * f / q;
  const DriveSpec d = DriveSpec::broadband(30, 70, t_eff * 4 * m * g * kC.kB);
  const Timetrace tr = thermal(f, q, 0, 1600, 10, d);
  const auto e = energy_windows(tr, 0.2, 8.0, std::pair{45.0, 55.0});
  const ExponentialFit fit = fit_exponential_distribution(e);
  EXPECT_TRUE(fit.accepted);
  const Psd psd = welch_psd(tr, segment_for_duration(tr, 20));
  const double pv = peak_variance(psd, 45, 55).value;
  EXPECT_LT(rel(mean(e), pv), 0.10);
  EXPECT_LT(rel(1 / fit.fit.param("beta"), pv), 0.10);
}

TEST(ExponentialFit, MleIdentity) {
  std::mt19937_64 rng(11);
  std::exponential_distribution<double> ex(0.5);
  std::vector<double> e(1000);
  for (double& v : e) v = ex(rng);
  const ExponentialFit f = fit_exponential_distribution(e);
  EXPECT_NEAR(f.fit.param("beta"), 0.5, 2 * f.fit.error("beta"));
  EXPECT_LT(rel(f.fit.param("beta"), 1.0 / mean(e)), 1e-12);
  EXPECT_THROW(fit_exponential_distribution(std::vector<double>(30, 0.0)), DomainError);
  EXPECT_THROW(fit_exponential_distribution(std::vector<double>(10, 1.0)), StatisticsError);
}

TEST(ExponentialFit, KsAcceptanceAndPower) {
  int accepted = 0, rejected_chi1 = 0, rejected_uniform = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::exponential_distribution<double> ex(1.0);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> a(500), b(500), c(500);
    for (auto& v : a) v = ex(rng);
    for (auto& v : b) {
      const double z = g(rng);
      v = z * z;
    }
    for (auto& v : c) v = u(rng);
    accepted += fit_exponential_distribution(a).accepted;
    rejected_chi1 += !fit_exponential_distribution(b).accepted;
    rejected_uniform += !fit_exponential_distribution(c).accepted;
  }
  EXPECT_GE(accepted, 97);
  EXPECT_GE(rejected_chi1, 95);
  EXPECT_EQ(rejected_uniform, 100);
}

// --- calibration and coupling -----------------------------------------------

VarianceEstimate calibration_variance(double deviation_Hz, double lambda, std::uint64_t seed,
                                      double* slope_analytic) {
  NVProbe nv;
  nv.bias_field = Vec3(0, 0, 1.7126e-3);
  const double w0 = nv_resonance(nv);
  MicrowaveSetting mw;
  mw.omega_mw = steepest_slope_frequency(nv, w0);
  mw.cal_enabled = true;
  mw.cal_deviation = kTwoPi * deviation_Hz;
  mw.cal_frequency = 141;
  *slope_analytic = std::abs(odmr_slope(nv, mw.omega_mw, w0));
  const Timetrace x = thermal(136, 1e3, 4, 300, seed);
  const Timetrace rate = counts_to_rate(nv_photon_channel(
      x, lambda, zero_point_motion(1e-10, kTwoPi * 136), nv, mw, 1e-3, seed));
  const Psd psd = welch_psd(rate, segment_for_duration(rate, 10));
  return bin_corrected(peak_variance(psd, 140.5, 141.5), 141, rate.dt);
}

TEST(Calibration, SlopeRecoveryAndInvariance) {
  double s0 = 0;
  const double s1 = slope_from_calibration(calibration_variance(3e5, 0, 12, &s0), kTwoPi * 3e5);
  EXPECT_LT(rel(s1, s0), 0.03);
  const double s2 = slope_from_calibration(calibration_variance(6e5, 0, 13, &s0), kTwoPi * 6e5);
  EXPECT_LT(rel(s2, s1), 0.03);
  // Motion on the NV line does not disturb the calibration peak.
  const double s3 = slope_from_calibration(calibration_variance(3e5, kTwoPi * 1.0, 14, &s0),
                                           kTwoPi * 3e5);
  EXPECT_LT(rel(s3, s0), 0.03);
}

TEST(Calibration, BinResponse) {
  EXPECT_EQ(bin_power_response(0, 1e-3), 1.0);
  EXPECT_NEAR(bin_power_response(500, 1e-3), 4 / (kPi * kPi), 1e-12);
  EXPECT_NEAR(bin_power_response(1000, 1e-3), 0.0, 1e-12);
}

TEST(Calibration, ZeroVarianceThrows) {
  VarianceEstimate v;
  EXPECT_THROW(slope_from_calibration(v, 1.0), CalibrationError);
  v.value = 1;
  EXPECT_THROW(slope_from_calibration(v, 0.0), DomainError);
}

TEST(ExtractCoupling, SquareRootLawAndErrors) {
  VarianceEstimate nv, x;
  nv.value = nv.raw_value = 2.0;
  nv.uncertainty = 0.1;
  x.value = 3.0;
  x.uncertainty = 0.1;
  const double l1 = extract_coupling(nv, 0.5, x, 1e-14).lambda_g;
  EXPECT_LT(rel(l1, 1e-14 * std::sqrt(2.0 / 0.25 / 3.0)), 1e-12);
  nv.value *= 4;
  EXPECT_LT(rel(extract_coupling(nv, 0.5, x, 1e-14).lambda_g, 2 * l1), 1e-12);
  VarianceEstimate zero;
  EXPECT_THROW(extract_coupling(nv, 0.5, zero, 1e-14), DomainError);
  EXPECT_THROW(extract_coupling(nv, 0.0, x, 1e-14), DomainError);
  EXPECT_THROW(extract_coupling(zero, 0.5, x, 1e-14), DomainError);
}

TEST(ExtractCoupling, EndToEnd48mHz) {
  const auto r = test::run_fig3(20201, 1000, 0.048, test::scratch_dir("e2e"));
  EXPECT_EQ(r.status, 0);
  EXPECT_LT(rel(r.lambda_Hz, 0.048), 0.10);
  EXPECT_LT(rel(r.slope_ratio, 1.0), 0.05);
}

TEST(ExtractCoupling, NullInjectionConsistentWithZero) {
  const auto dir = test::scratch_dir("null");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r = test::run_fig3(seed, 1000, 0.0, dir);
    EXPECT_EQ(r.injected_Hz, 0.0);
    EXPECT_LT(std::abs(r.lambda_sq_raw), 3 * r.lambda_sq_sigma) << "seed " << seed;
  }
}

// Across 100 seeds the estimator is unbiased and its spread shrinks as
// 1/sqrt(integration time). 25 s PSD segments keep enough Welch averages at
// the shorter duration for the noise-floor estimate to stay well conditioned.
TEST(ExtractCoupling, EstimatorConsistency) {
  const auto dir = test::scratch_dir("consistency");
  double spread[2];
  const double durations[2] = {250, 1000};
  for (int k = 0; k < 2; ++k) {
    std::vector<double> l;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
      l.push_back(test::run_fig3(5000 + seed, durations[k], 0.048, dir, 25).lambda_Hz);
    if (k == 1) EXPECT_LT(std::abs(mean(l) / 0.048 - 1), 0.03);
    spread[k] = std::sqrt(variance(l));
  }
  EXPECT_NEAR(spread[0] / spread[1], 2.0, 0.2 * 2.0);
}

} // namespace
} // namespace levmag
