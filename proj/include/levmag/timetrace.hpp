// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "levmag/errors.hpp"

namespace levmag {

/// Uniformly sampled real-valued record.
struct Timetrace {
  double dt = 0;  // s
  double t0 = 0;  // time of the first sample [s]
  std::vector<double> samples;
  std::string unit;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(dt > 0)) throw DomainError("timetrace dt must be > 0");
    if (samples.size() < 2) throw DomainError("timetrace needs >= 2 samples");
  }
  std::size_t size() const { return samples.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  double duration() const { return static_cast<double>(samples.size()) * dt; }
  double sample_rate() const { return 1.0 / dt; }
};

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Population variance (divides by N).
inline double variance(const std::vector<double>& v) {
  if (v.empty()) return 0;
  const double m = mean(v);
  double acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

} // namespace levmag
