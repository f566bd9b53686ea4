// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "levmag/constants.hpp"
#include "levmag/errors.hpp"
#include "levmag/fft.hpp"
#include "levmag/timetrace.hpp"

namespace levmag {

enum class Window { hann, rectangular };

inline const char* to_string(Window w) {
  return w == Window::hann ? "hann" : "rectangular";
}

/// One-sided power spectral density. Normalized so that
/// sum(values) * resolution equals the mean (window-weighted) variance of the
/// segments.
struct Psd {
  std::vector<double> frequencies; // Hz
  std::vector<double> values;      // unit^2 / Hz
  double resolution = 0;           // bin spacing [Hz]
  Window window = Window::hann;
  std::size_t segment_len = 0;
  double overlap = 0;
  std::size_t segments = 0;
  std::string unit;
  /// Mean over segments of sum(w^2 (x - mean)^2) / sum(w^2): the windowed
  /// signal variance that the integrated PSD must reproduce (Parseval).
  double windowed_variance = 0;

  double integral() const {
    double s = 0;
    for (double v : values) s += v;
    return s * resolution;
  }
  std::size_t bin_of(double f) const {
    return static_cast<std::size_t>(std::llround(f / resolution));
  }
};

inline std::vector<double> window_coefficients(Window w, std::size_t n) {
  std::vector<double> c(n, 1.0);
  if (w == Window::hann)
    for (std::size_t i = 0; i < n; ++i)
      c[i] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n)));
  return c;
}

/// Welch estimate: mean-removed, windowed segments of `segment_len` samples
/// with fractional overlap, averaged periodograms.
inline Psd welch_psd(const Timetrace& trace, std::size_t segment_len,
                     double overlap = 0.5, Window window = Window::hann) {
  trace.validate();
  if (segment_len < 8) throw ConfigError("PSD segment shorter than 8 samples");
  if (segment_len > trace.size()) throw ConfigError("PSD segment longer than trace");
  if (!(overlap >= 0 && overlap < 1)) throw ConfigError("overlap must lie in [0, 1)");

  const std::size_t hop = std::max<std::size_t>(
      1, segment_len - static_cast<std::size_t>(std::llround(overlap * static_cast<double>(segment_len))));
  const std::size_t n_seg = 1 + (trace.size() - segment_len) / hop;
  const auto w = window_coefficients(window, segment_len);
  double w2 = 0;
  for (double c : w) w2 += c * c;

  RealFft fft(segment_len);
  Psd psd;
  psd.resolution = trace.sample_rate() / static_cast<double>(segment_len);
  psd.window = window;
  psd.segment_len = segment_len;
  psd.overlap = overlap;
  psd.segments = n_seg;
  psd.unit = trace.unit;
  psd.values.assign(fft.bins(), 0.0);
  psd.frequencies.resize(fft.bins());
  for (std::size_t k = 0; k < fft.bins(); ++k)
    psd.frequencies[k] = static_cast<double>(k) * psd.resolution;

  auto buf = fft.real();
  double windowed_power = 0;
  for (std::size_t s = 0; s < n_seg; ++s) {
    const double* x = trace.samples.data() + s * hop;
    double m = 0;
    for (std::size_t i = 0; i < segment_len; ++i) m += x[i];
    m /= static_cast<double>(segment_len);
    for (std::size_t i = 0; i < segment_len; ++i) {
      buf[i] = (x[i] - m) * w[i];
      windowed_power += buf[i] * buf[i];
    }
    fft.forward();
    const auto spec = fft.spectrum();
    for (std::size_t k = 0; k < spec.size(); ++k) psd.values[k] += std::norm(spec[k]);
  }
  psd.windowed_variance = windowed_power / (w2 * static_cast<double>(n_seg));
  const double scale = 1.0 / (trace.sample_rate() * w2 * static_cast<double>(n_seg));
  for (std::size_t k = 0; k < psd.values.size(); ++k) {
    const bool edge = k == 0 || (segment_len % 2 == 0 && k == psd.values.size() - 1);
    psd.values[k] *= (edge ? 1.0 : 2.0) * scale;
  }
  return psd;
}

/// Segment length (power of two) closest to `seconds` of data, capped at the
/// trace length.
inline std::size_t segment_for_duration(const Timetrace& trace, double seconds) {
  const double want = seconds / trace.dt;
  std::size_t n = 8;
  while (static_cast<double>(n) * 1.5 < want && n * 2 <= trace.size()) n *= 2;
  return std::min(n, trace.size());
}

enum class FloorModel { none, median_sidebands };

struct VarianceEstimate {
  double band_lo = 0; // Hz
  double band_hi = 0; // Hz
  double value = 0;   // unit^2, clamped at 0
  double raw_value = 0;
  double floor = 0;       // PSD level subtracted [unit^2/Hz]
  double uncertainty = 0; // unit^2
  bool clamped = false;
  std::size_t bins = 0;
};

namespace detail {
inline double median(std::vector<double> v) {
  if (v.empty()) return 0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}
} // namespace detail

/// Integrates the PSD over [f_lo, f_hi]. With a sideband floor, the median of
/// the 10 bins on each side outside the band is subtracted bin by bin.
inline VarianceEstimate peak_variance(const Psd& psd, double f_lo, double f_hi,
                                      FloorModel floor = FloorModel::median_sidebands,
                                      std::size_t sideband_bins = 10) {
  if (psd.values.empty()) throw DomainError("empty PSD");
  if (!(f_lo <= f_hi)) throw DomainError("band reversed");
  const double f_max = psd.frequencies.back();
  if (f_lo < 0 || f_hi > f_max + 0.5 * psd.resolution)
    throw DomainError("band outside the PSD range");
  const auto lo = static_cast<std::size_t>(std::ceil(f_lo / psd.resolution - 1e-9));
  const auto hi = std::min(psd.values.size() - 1,
                           static_cast<std::size_t>(std::floor(f_hi / psd.resolution + 1e-9)));
  if (lo > hi) throw DomainError("band contains no PSD bins");

  VarianceEstimate est;
  est.band_lo = f_lo;
  est.band_hi = f_hi;
  est.bins = hi - lo + 1;
  const double nb = static_cast<double>(est.bins);

  double sum = 0;
  double sum_sq = 0;
  for (std::size_t k = lo; k <= hi; ++k) {
    sum += psd.values[k];
    sum_sq += psd.values[k] * psd.values[k];
  }

  if (floor == FloorModel::median_sidebands) {
    std::vector<double> side;
    for (std::size_t j = 1; j <= sideband_bins; ++j) {
      if (lo >= j) side.push_back(psd.values[lo - j]);
      if (hi + j < psd.values.size()) side.push_back(psd.values[hi + j]);
    }
    if (side.size() < 2) throw DomainError("no sideband bins for the noise floor");
    est.floor = detail::median(side);
    double var = 0;
    for (double v : side) var += (v - est.floor) * (v - est.floor);
    var /= static_cast<double>(side.size() - 1);
    const double ns = static_cast<double>(side.size());
    // Hann-windowed neighbouring bins are correlated (|rho|^2 = 4/9), which
    // inflates the variance of a sum of adjacent bins by 1 + 2 * 4/9.
    const double corr = psd.window == Window::hann ? 17.0 / 9.0 : 1.0;
    est.uncertainty = psd.resolution * std::sqrt(corr * var * (nb + nb * nb / ns));
  } else {
    const double k_eff = std::max(1.0, static_cast<double>(psd.segments));
    est.uncertainty = psd.resolution * std::sqrt(sum_sq / k_eff);
  }
  est.raw_value = (sum - nb * est.floor) * psd.resolution;
  est.clamped = est.raw_value < 0;
  est.value = std::max(0.0, est.raw_value);
  return est;
}

/// Frequency of the largest PSD bin inside [f_lo, f_hi].
inline double peak_frequency(const Psd& psd, double f_lo, double f_hi) {
  double best = -1;
  double f_best = 0.5 * (f_lo + f_hi);
  for (std::size_t k = 0; k < psd.values.size(); ++k) {
    const double f = psd.frequencies[k];
    if (f < f_lo || f > f_hi) continue;
    if (psd.values[k] > best) {
      best = psd.values[k];
      f_best = f;
    }
  }
  return f_best;
}

} // namespace levmag
