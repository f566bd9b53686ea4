// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Windowed mode energies, exponential-distribution fit and the
// Kolmogorov-Smirnov goodness-of-fit machinery.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "levmag/errors.hpp"
#include "levmag/fft.hpp"
#include "levmag/fitting.hpp"
#include "levmag/timetrace.hpp"

namespace levmag {

/// Kolmogorov distribution tail Q_KS(l) = 2 sum_k (-1)^(k-1) exp(-2 k^2 l^2).
inline double kolmogorov_tail(double l) {
  if (l < 0.2) return 1.0;
  double sum = 0;
  double sign = 1;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * l * l);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Effective-sample-size scaling of the KS statistic (Stephens).
inline double ks_scale(std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  return rn + 0.12 + 0.11 / rn;
}

/// Critical value of D at significance alpha.
inline double ks_critical_value(std::size_t n, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw DomainError("significance must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / ks_scale(n);
}

/// One-sample KS statistic D = sup |F_n - F| for a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

struct ExponentialFit {
  FitResult fit; // "beta"
  double ks_statistic = 0;
  double ks_critical = 0; // at `alpha`
  double p_value = 0;
  double alpha = 0.01;
  bool accepted = false; // ks_statistic <= ks_critical
};

/// Maximum-likelihood exponential fit P(E) = beta exp(-beta E), beta = 1/mean,
/// with a KS test against the fitted distribution.
inline ExponentialFit fit_exponential_distribution(std::span<const double> energies,
                                                   double alpha = 0.01) {
  if (energies.size() < 20) throw StatisticsError("exponential fit needs >= 20 samples");
  double sum = 0;
  for (double e : energies) {
    if (!(e >= 0) || !std::isfinite(e)) throw DomainError("energies must be non-negative");
    sum += e;
  }
  if (!(sum > 0)) throw DomainError("energies have zero mean");
  const double n = static_cast<double>(energies.size());
  const double beta = n / sum;

  ExponentialFit out;
  out.alpha = alpha;
  out.fit.names = {"beta"};
  out.fit.params = {beta};
  out.fit.errors = {beta / std::sqrt(n)};
  out.fit.converged = true;
  out.fit.iterations = 1;
  out.ks_statistic = ks_statistic(std::vector<double>(energies.begin(), energies.end()),
                                  [beta](double e) { return 1.0 - std::exp(-beta * e); });
  out.ks_critical = ks_critical_value(energies.size(), alpha);
  out.p_value = kolmogorov_tail(ks_scale(energies.size()) * out.ks_statistic);
  out.accepted = out.ks_statistic <= out.ks_critical;
  return out;
}

/// Zero-phase FFT bandpass: keeps spectral bins inside [f_lo, f_hi] Hz.
inline std::vector<double> bandpass(const Timetrace& trace, double f_lo, double f_hi) {
  trace.validate();
  if (!(f_lo >= 0 && f_lo < f_hi)) throw DomainError("bandpass needs 0 <= f_lo < f_hi");
  RealFft fft(trace.size());
  std::copy(trace.samples.begin(), trace.samples.end(), fft.real().begin());
  fft.forward();
  auto spec = fft.spectrum();
  const double df = 1.0 / trace.duration();
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    if (f < f_lo || f > f_hi) spec[k] = 0;
  }
  fft.backward();
  std::vector<double> out(trace.size());
  const double norm = 1.0 / static_cast<double>(trace.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fft.real()[i] * norm;
  return out;
}

/// Per-window energy samples: the (optionally bandpassed) variance of x over
/// consecutive windows of `window_len` seconds, starting every `stride`
/// seconds (stride 0 = back to back). Each sample is proportional to the
/// mode energy averaged over a window much shorter than 1/gamma.
inline std::vector<double> energy_windows(
    const Timetrace& trace, double window_len, double stride = 0,
    std::optional<std::pair<double, double>> band = std::nullopt) {
  trace.validate();
  if (!(window_len > 0)) throw DomainError("window length must be > 0");
  if (stride == 0) stride = window_len;
  if (!(stride >= window_len)) throw DomainError("stride must be >= window length");
  const auto w = static_cast<std::size_t>(std::llround(window_len / trace.dt));
  const auto s = static_cast<std::size_t>(std::llround(stride / trace.dt));
  if (w < 2) throw DomainError("window shorter than two samples");
  if (band && window_len * 0.5 * (band->first + band->second) < 10.0)
    throw DomainError("window must span >= 10 oscillation periods");

  const std::vector<double> x = band ? bandpass(trace, band->first, band->second)
                                     : trace.samples;
  std::vector<double> out;
  for (std::size_t start = 0; start + w <= x.size(); start += s) {
    double m = 0;
    for (std::size_t i = start; i < start + w; ++i) m += x[i];
    m /= static_cast<double>(w);
    double v = 0;
    for (std::size_t i = start; i < start + w; ++i) v += (x[i] - m) * (x[i] - m);
    out.push_back(v / static_cast<double>(w));
  }
  if (out.size() < 20)
    throw StatisticsError("fewer than 20 energy windows (" + std::to_string(out.size()) + ")");
  return out;
}

/// Coefficient of variation std/mean of a sample.
inline double coefficient_of_variation(const std::vector<double>& v) {
  const double m = mean(v);
  return m != 0 ? std::sqrt(variance(v)) / std::abs(m) : INFINITY;
}

} // namespace levmag
