// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Least-squares fits: Levenberg-Marquardt core, power law, Lorentzian dip,
// and exponential energy decay (ringdown).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "levmag/constants.hpp"
#include "levmag/errors.hpp"
#include "levmag/timetrace.hpp"

namespace levmag {

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> errors; // one-sigma standard errors
  double residual_norm = 0;   // ||r||_2
  bool converged = false;
  int iterations = 0;
  /// False when the data do not constrain the fit (e.g. decay rate
  /// uncertainty spanning a decade).
  bool informative = true;
  std::string message;

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw std::out_of_range("no fit parameter '" + name + "'");
  }
  double param(const std::string& name) const { return params[index(name)]; }
  double error(const std::string& name) const { return errors[index(name)]; }
};

struct LmOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10; // relative step
};

/// Levenberg-Marquardt on residuals r(p) with Jacobian J(p) = dr/dp.
/// Standard errors come from s^2 (J^T J)^-1 with s^2 = |r|^2 / (m - n).
inline FitResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
    Eigen::VectorXd p, std::vector<std::string> names, const LmOptions& opts = {}) {
  FitResult fit;
  fit.names = std::move(names);
  Eigen::VectorXd r = residual(p);
  const auto m = r.size();
  const auto n = p.size();
  double cost = r.squaredNorm();
  double mu = 1e-3;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Eigen::MatrixXd J = jacobian(p);
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool accepted = false;
    bool small_step = false;
    while (mu < 1e20) {
      Eigen::MatrixXd Ad = A;
      for (Eigen::Index i = 0; i < n; ++i)
        Ad(i, i) += mu * std::max(A(i, i), 1e-300);
      const Eigen::VectorXd dp = Ad.ldlt().solve(-g);
      if (!dp.allFinite()) {
        mu *= 10;
        continue;
      }
      small_step = dp.norm() <= opts.step_tolerance * (p.norm() + opts.step_tolerance);
      const Eigen::VectorXd p_new = p + dp;
      const Eigen::VectorXd r_new = residual(p_new);
      const double cost_new = r_new.allFinite() ? r_new.squaredNorm() : INFINITY;
      if (cost_new <= cost) {
        p = p_new;
        r = r_new;
        cost = cost_new;
        mu = std::max(mu / 10, 1e-12);
        accepted = true;
        break;
      }
      if (small_step) break;
      mu *= 10;
    }
    // A tiny step only signals convergence if it was not forced by heavy
    // damping after rejected steps (which happens with a bad Jacobian).
    if ((small_step && (accepted || mu < 1e10)) || cost == 0) {
      fit.converged = true;
      break;
    }
    if (!accepted) break; // damping exhausted without progress
  }
  fit.iterations = it + (fit.converged ? 1 : 0);
  fit.params.assign(p.data(), p.data() + n);
  fit.residual_norm = std::sqrt(cost);
  const Eigen::MatrixXd J = jacobian(p);
  const double dof = static_cast<double>(std::max<Eigen::Index>(1, m - n));
  const Eigen::MatrixXd cov =
      (J.transpose() * J).completeOrthogonalDecomposition().pseudoInverse() * (cost / dof);
  fit.errors.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) fit.errors[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, cov(i, i)));
  if (fit.converged) {
    bool finite = p.allFinite();
    for (double e : fit.errors) finite = finite && std::isfinite(e);
    if (!finite) {
      fit.converged = false;
      fit.message = "non-finite parameters or errors";
    }
  } else {
    fit.message = "no convergence after " + std::to_string(fit.iterations) + " iterations";
  }
  return fit;
}

/// f(h) = f0 h^(-gamma_exp), by ordinary least squares on log f vs log h.
/// f0 is the h = 1 intercept.
inline FitResult fit_power_law(std::span<const double> h, std::span<const double> f) {
  if (h.size() != f.size()) throw DomainError("power-law fit: size mismatch");
  if (h.size() < 3) throw DomainError("power-law fit needs >= 3 points");
  const std::size_t n = h.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(h[i] > 0) || !(f[i] > 0) || !std::isfinite(h[i]) || !std::isfinite(f[i]))
      throw DomainError("power-law fit needs positive finite data");
    sx += std::log(h[i]);
    sy += std::log(f[i]);
  }
  const double nn = static_cast<double>(n);
  const double mx = sx / nn;
  const double my = sy / nn;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(h[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(f[i]) - my);
  }
  if (!(sxx > 0)) throw DomainError("power-law fit needs at least two distinct h values");
  const double slope = sxy / sxx;
  const double icpt = my - slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::log(f[i]) - (icpt + slope * std::log(h[i]));
    ssr += e * e;
  }
  const double s2 = n > 2 ? ssr / (nn - 2) : 0.0;
  const double se_slope = std::sqrt(s2 / sxx);
  const double se_icpt = std::sqrt(s2 * (1.0 / nn + mx * mx / sxx));
  FitResult fit;
  fit.names = {"f0", "gamma_exp"};
  fit.params = {std::exp(icpt), -slope};
  fit.errors = {std::exp(icpt) * se_icpt, se_slope};
  fit.residual_norm = std::sqrt(ssr);
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

/// y = offset - depth / (1 + ((x - center) / hwhm)^2); depth < 0 for a peak.
inline double lorentzian_model(double x, double center, double hwhm, double depth,
                               double offset) {
  const double u = (x - center) / hwhm;
  return offset - depth / (1.0 + u * u);
}

/// dy/dx of the Lorentzian model.
inline double lorentzian_model_slope(double x, double center, double hwhm, double depth) {
  const double u = (x - center) / hwhm;
  const double den = 1.0 + u * u;
  return depth * 2.0 * u / (hwhm * den * den);
}

/// Lorentzian dip (or peak) fit: center, hwhm, depth, offset.
/// Works in normalized coordinates internally; initial values from the
/// extremum and the half-depth crossings.
inline FitResult fit_lorentzian(std::span<const double> x, std::span<const double> y,
                                const LmOptions& opts = {}) {
  if (x.size() != y.size()) throw DomainError("Lorentzian fit: size mismatch");
  if (x.size() < 5) throw DomainError("Lorentzian fit needs >= 5 points");
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw DomainError("Lorentzian fit: non-finite data");
  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double x0 = 0.5 * (*xmin_it + *xmax_it);
  const double xs = 0.5 * (*xmax_it - *xmin_it);
  if (!(xs > 0)) throw DomainError("Lorentzian fit needs distinct x values");
  double ys = 0;
  for (double v : y) ys = std::max(ys, std::abs(v));
  if (!(ys > 0)) ys = 1;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  Eigen::VectorXd u(static_cast<Eigen::Index>(n)), v(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    u[static_cast<Eigen::Index>(k)] = (x[order[k]] - x0) / xs;
    v[static_cast<Eigen::Index>(k)] = y[order[k]] / ys;
  }

  // Initial guess.
  const std::size_t edge = std::max<std::size_t>(1, n / 10);
  double base = 0;
  for (std::size_t k = 0; k < edge; ++k) base += v[static_cast<Eigen::Index>(k)] + v[static_cast<Eigen::Index>(n - 1 - k)];
  base /= static_cast<double>(2 * edge);
  Eigen::Index imin, imax;
  const double vmin = v.minCoeff(&imin);
  const double vmax = v.maxCoeff(&imax);
  const bool dip = base - vmin >= vmax - base;
  const Eigen::Index iext = dip ? imin : imax;
  const double depth0 = base - v[iext];
  const double half = base - 0.5 * depth0;
  Eigen::Index left = iext, right = iext;
  auto beyond_half = [&](Eigen::Index k) { return dip ? v[k] >= half : v[k] <= half; };
  while (left > 0 && !beyond_half(left)) --left;
  while (right < static_cast<Eigen::Index>(n) - 1 && !beyond_half(right)) ++right;
  double w0 = 0.5 * (u[right] - u[left]);
  if (!(w0 > 0)) w0 = 0.1;

  const auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(u.size());
    for (Eigen::Index k = 0; k < u.size(); ++k)
      r[k] = lorentzian_model(u[k], p[0], p[1], p[2], p[3]) - v[k];
    return r;
  };
  const auto jacobian = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd J(u.size(), 4);
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      const double t = (u[k] - p[0]) / p[1];
      const double den = 1.0 + t * t;
      const double g = p[2] / (den * den) * 2.0 * t / p[1];
      J(k, 0) = -g;         // d/dcenter
      J(k, 1) = -g * t;     // d/dhwhm
      J(k, 2) = -1.0 / den; // d/ddepth
      J(k, 3) = 1.0;        // d/doffset
    }
    return J;
  };
  Eigen::VectorXd p0(4);
  p0 << u[iext], w0, depth0, base;
  FitResult fit = levenberg_marquardt(residual, jacobian, p0,
                                      {"center", "hwhm", "depth", "offset"}, opts);
  // Back to physical units.
  fit.params[0] = x0 + xs * fit.params[0];
  fit.params[1] = xs * std::abs(fit.params[1]);
  fit.params[2] *= ys;
  fit.params[3] *= ys;
  fit.errors[0] *= xs;
  fit.errors[1] *= xs;
  fit.errors[2] *= ys;
  fit.errors[3] *= ys;
  fit.residual_norm *= ys;
  return fit;
}

/// Squared quadrature-demodulated amplitude A^2(t) of x(t) ~ A cos(w t + phi),
/// averaged over consecutive blocks of whole periods.
struct Envelope {
  std::vector<double> times;    // block centers [s]
  std::vector<double> energies; // A^2 [unit^2]
};

inline Envelope demodulated_energy(const Timetrace& trace, double omega,
                                   double block_duration) {
  trace.validate();
  if (!(omega > 0)) throw DomainError("demodulation frequency must be > 0");
  const double period = kTwoPi / omega;
  const double periods = std::max(1.0, std::round(block_duration / period));
  const auto block = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(periods * period / trace.dt)));
  Envelope env;
  for (std::size_t start = 0; start + block <= trace.size(); start += block) {
    double si = 0, sq = 0;
    for (std::size_t i = start; i < start + block; ++i) {
      const double ph = omega * trace.time(i);
      si += trace.samples[i] * std::cos(ph);
      sq += trace.samples[i] * std::sin(ph);
    }
    si /= static_cast<double>(block);
    sq /= static_cast<double>(block);
    env.times.push_back(trace.time(start) + 0.5 * static_cast<double>(block - 1) * trace.dt);
    env.energies.push_back(4.0 * (si * si + sq * sq));
  }
  return env;
}

/// Fits E(t) = E0 exp(-gamma (t - t_first)) to an energy envelope.
/// Parameters: E0, gamma, and Q = omega / gamma when omega > 0.
/// The gamma error is inflated for lag-1 residual autocorrelation. The fit is
/// flagged non-informative unless gamma - 2 se > 0 and the 2-sigma interval
/// spans less than a decade.
inline FitResult fit_energy_decay(std::span<const double> t, std::span<const double> e,
                                  double omega = 0) {
  if (t.size() != e.size()) throw DomainError("decay fit: size mismatch");
  if (t.size() < 3) throw DomainError("decay fit needs >= 3 envelope points");
  for (double v : e)
    if (!(v > 0) || !std::isfinite(v)) throw DomainError("decay fit needs a positive envelope");
  const std::size_t n = t.size();
  const double tf = t.front();
  const double span_t = t.back() - tf;
  if (!(span_t > 0)) throw DomainError("decay fit needs increasing times");

  // Log-linear start, then LM on the linear model in scaled time s = (t - tf)/span.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (t[i] - tf) / span_t;
    const double l = std::log(e[i]);
    sx += s;
    sy += l;
    sxx += s * s;
    sxy += s * l;
  }
  const double nn = static_cast<double>(n);
  const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / nn;
  double es = 0;
  for (double v : e) es = std::max(es, v);

  const auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double s = (t[i] - tf) / span_t;
      r[static_cast<Eigen::Index>(i)] = p[0] * std::exp(-p[1] * s) - e[i] / es;
    }
    return r;
  };
  const auto jacobian = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd J(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = (t[i] - tf) / span_t;
      const double ex = std::exp(-p[1] * s);
      J(static_cast<Eigen::Index>(i), 0) = ex;
      J(static_cast<Eigen::Index>(i), 1) = -p[0] * s * ex;
    }
    return J;
  };
  Eigen::VectorXd p0(2);
  p0 << std::exp(icpt) / es, -slope;
  FitResult lm = levenberg_marquardt(residual, jacobian, p0, {"E0", "gamma"});

  // Lag-1 autocorrelation of the residuals -> effective sample size.
  const Eigen::VectorXd r = residual(Eigen::Map<const Eigen::VectorXd>(lm.params.data(), 2));
  double c0 = r.squaredNorm();
  double c1 = 0;
  for (Eigen::Index i = 1; i < r.size(); ++i) c1 += r[i] * r[i - 1];
  const double rho = c0 > 0 ? std::clamp(c1 / c0, 0.0, 0.99) : 0.0;
  const double inflate = std::sqrt((1 + rho) / (1 - rho));

  FitResult fit;
  fit.names = {"E0", "gamma"};
  const double gamma = lm.params[1] / span_t;
  const double se_gamma = lm.errors[1] / span_t * inflate;
  fit.params = {lm.params[0] * es, gamma};
  fit.errors = {lm.errors[0] * es * inflate, se_gamma};
  if (omega > 0) {
    fit.names.push_back("Q");
    fit.params.push_back(omega / gamma);
    fit.errors.push_back(std::abs(omega / gamma) * se_gamma / std::abs(gamma));
  }
  fit.residual_norm = lm.residual_norm * es;
  fit.converged = lm.converged;
  fit.iterations = lm.iterations;
  fit.message = lm.message;
  const double lo = gamma - 2 * se_gamma;
  const double hi = gamma + 2 * se_gamma;
  fit.informative = fit.converged && lo > 0 && hi / lo < 10.0;
  if (!fit.informative && fit.message.empty())
    fit.message = "decay rate not constrained by the data";
  return fit;
}

/// Demodulates the free-decay section at omega, averaging over blocks of
/// ~1/(20 gamma_guess) (whole periods), and fits the energy decay.
inline FitResult fit_ringdown(const Timetrace& trace, double omega, double q_guess) {
  trace.validate();
  if (!(omega > 0) || !(q_guess > 0)) throw DomainError("ringdown fit needs omega, Q guess > 0");
  const double gamma_guess = omega / q_guess;
  const double block = std::min(1.0 / (20.0 * gamma_guess), trace.duration() / 20.0);
  const Envelope env = demodulated_energy(trace, omega, block);
  for (double v : env.energies)
    if (!(v > 0)) throw DomainError("ringdown envelope is not positive");
  return fit_energy_decay(env.times, env.energies, omega);
}

} // namespace levmag
