// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

namespace levmag {

/// Safeguarded Newton iteration on a bracket [lo, hi] straddling a sign
/// change of `f`; `df` is its derivative.
///
/// Newton steps that leave the bracket, or fail to halve the previous step,
/// are replaced by bisection. Stops once |f| <= ftol or the step reaches
/// machine resolution. Returns nullopt when the bracket has no sign change.
template <class F, class DF>
std::optional<double> find_root_bracketed(F&& f, DF&& df, double lo, double hi,
                                          double ftol, int max_iter = 500) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo < 0) == (fhi < 0)) return std::nullopt;
  if (flo > 0) std::swap(lo, hi); // f(lo) < 0 < f(hi) from here on

  double x = 0.5 * (lo + hi);
  double dx_old = std::abs(hi - lo);
  double dx = dx_old;
  double fx = f(x);
  double dfx = df(x);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(fx) <= ftol) return x;
    const bool outside = ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) > 0;
    const bool slow = std::abs(2.0 * fx) > std::abs(dx_old * dfx);
    if (outside || slow || !std::isfinite(dfx) || dfx == 0) {
      dx_old = dx;
      dx = 0.5 * (hi - lo);
      x = lo + dx;
    } else {
      dx_old = dx;
      dx = fx / dfx;
      x -= dx;
    }
    if (std::abs(dx) <= 2 * eps * std::abs(x)) return x;
    fx = f(x);
    dfx = df(x);
    if (fx < 0) {
      lo = x;
    } else {
      hi = x;
    }
  }
  return x;
}

} // namespace levmag
