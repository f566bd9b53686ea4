// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form spin-mechanics: NV response, zero-point scales, gradient and
// dipole-dipole couplings, magneto-rotational frequencies, decoherence,
// cooperativity and the optimal-radius rule.
#pragma once

#include <cmath>
#include <utility>

#include "levmag/constants.hpp"
#include "levmag/errors.hpp"
#include "levmag/magnetostatics.hpp"
#include "levmag/vector.hpp"

namespace levmag {

struct NVProbe {
  Vec3 position_rel_magnet = Vec3(0, 0, 1e-4); // m, from the magnet center
  Vec3 axis = Vec3::UnitZ();                   // n_s
  double zero_field_splitting = kTwoPi * 2.87e9; // rad/s
  double contrast = 0.3;
  double linewidth = kTwoPi * 5e6; // HWHM, rad/s
  double bright_rate = 1e5;        // counts/s in m_s = 0
  Vec3 bias_field = Vec3::Zero();  // static field at the NV [T]

  void validate() const {
    if (!position_rel_magnet.allFinite()) throw DomainError("NV position not finite");
    require_unit(axis, "NV axis", 1e-9);
    if (!(zero_field_splitting > 0)) throw DomainError("D_zf must be > 0");
    if (!(contrast > 0 && contrast < 1)) throw DomainError("contrast must lie in (0, 1)");
    if (!(linewidth > 0)) throw DomainError("ODMR linewidth must be > 0");
    if (!(bright_rate > 0)) throw DomainError("bright rate must be > 0");
    if (!bias_field.allFinite()) throw DomainError("bias field not finite");
  }
};

struct CouplingReport {
  double lambda_g = 0;            // rad/s
  double lambda_dp = 0;           // rad/s
  double lambda_g_prefactor = 0;  // gamma_e mu0 rho_mu a^3 / r'^4 x_zp
  double lambda_dp_prefactor = 0; // gamma_e mu0 m_zp a^3 / r'^3
  double x_zp = 0;                // m
  double m_zp = 0;                // A/m
  double f_g = 0;
  double f_dp = 0;
  double r_prime = 0; // m
};

struct SpinMechBudget {
  double temperature = 0; // K
  double Q = 0;
  double T2 = 0;          // s
  double gamma_th = 0;    // rad/s
  double cooperativity = 0;
};

/// x_zp = sqrt(hbar / (2 m omega)).
inline double zero_point_motion(double mass, double omega,
                                const PhysicalConstants& c = {}) {
  if (!(mass > 0) || !(omega > 0))
    throw DomainError("zero-point motion needs mass > 0 and omega > 0");
  return std::sqrt(c.hbar / (2.0 * mass * omega));
}

/// |r'| = sqrt((z_md + a)^2 + x_d^2 + y_d^2).
inline double nv_distance(double z_md, double a, double x_d, double y_d) {
  if (!std::isfinite(z_md) || !std::isfinite(a) || !std::isfinite(x_d) ||
      !std::isfinite(y_d))
    throw DomainError("NV geometry not finite");
  if (!(z_md + a > 0)) throw DomainError("NV must sit above the magnet center");
  const double zz = z_md + a;
  return std::sqrt(zz * zz + x_d * x_d + y_d * y_d);
}

/// Secular m_s = 0 -> +1 and 0 -> -1 transition frequencies.
inline std::pair<double, double> nv_transition_shift(
    const Vec3& field, const Vec3& axis, double zero_field_splitting,
    const PhysicalConstants& c = {}) {
  require_unit(axis, "NV axis", 1e-9);
  const double shift = c.gamma_e * field.dot(axis);
  return {zero_field_splitting + shift, zero_field_splitting - shift};
}

/// gamma_e mu0 rho_mu a^3 / r'^4 * x_zp, i.e. the gradient coupling at f_g = 1.
inline double gradient_coupling_prefactor(double magnetization, double radius,
                                          double r_prime, double x_zp,
                                          const PhysicalConstants& c = {}) {
  if (!(magnetization > 0 && radius > 0 && r_prime > 0 && x_zp >= 0))
    throw DomainError("gradient coupling prefactor needs positive inputs");
  return c.gamma_e * c.mu0 * magnetization * std::pow(radius, 3) /
         std::pow(r_prime, 4) * x_zp;
}

/// Gradient coupling of a translational mode along `motion_dir` to the NV.
///
/// lambda_g = gamma_e x_zp |d(B.n_s)/ds|, with the derivative of the full
/// dipole field taken by central differences (step 1e-6 r') as the magnet is
/// displaced along `motion_dir`. f_g is the ratio to the closed-form prefactor.
inline CouplingReport gradient_coupling(const Magnet& magnet,
                                        const NVProbe& nv,
                                        const Vec3& motion_dir,
                                        double omega_mode,
                                        const PhysicalConstants& c = {}) {
  magnet.validate();
  require_unit(motion_dir, "motion direction", 1e-9);
  require_unit(nv.axis, "NV axis", 1e-9);
  const double r_prime = nv.position_rel_magnet.norm();
  if (!(r_prime > magnet.radius))
    throw DomainError("NV inside the magnet: r' must exceed a");

  CouplingReport rep;
  rep.r_prime = r_prime;
  rep.x_zp = zero_point_motion(magnet.mass(), omega_mode, c);
  const Vec3 mu = magnet.moment() * magnet.moment_direction;
  const double h = 1e-6 * r_prime;
  auto projected = [&](double s) {
    return dipole_field(mu, s * motion_dir, nv.position_rel_magnet, c).dot(nv.axis);
  };
  const double grad = (projected(h) - projected(-h)) / (2 * h);
  rep.lambda_g = c.gamma_e * rep.x_zp * std::abs(grad);
  rep.lambda_g_prefactor = gradient_coupling_prefactor(
      magnet.magnetization, magnet.radius, r_prime, rep.x_zp, c);
  rep.f_g = rep.lambda_g / rep.lambda_g_prefactor;
  return rep;
}

/// m_zp = sqrt(hbar gamma_e rho_mu / (2 V)).
inline double magnon_zero_point(double magnetization, double volume,
                                const PhysicalConstants& c = {}) {
  if (!(magnetization > 0) || !(volume > 0))
    throw DomainError("magnon zero point needs positive inputs");
  return std::sqrt(c.hbar * c.gamma_e * magnetization / (2.0 * volume));
}

/// Dipole-dipole coupling of the Kittel magnon to the NV.
///
/// A uniform magnetization fluctuation m_zp e produces, at the NV,
/// n_s.B = (mu0 m_zp a^3 / r'^3) e.g with g = [3 r^(r^.n_s) - n_s] / 3.
/// The fluctuation is transverse to the static moment, so f_dp is the norm of
/// g projected on the plane perpendicular to the moment direction (the
/// best-coupled transverse component).
inline CouplingReport dipole_coupling(const Magnet& magnet, const NVProbe& nv,
                                      const PhysicalConstants& c = {}) {
  magnet.validate();
  require_unit(nv.axis, "NV axis", 1e-9);
  const double r_prime = nv.position_rel_magnet.norm();
  if (!(r_prime > magnet.radius))
    throw DomainError("NV inside the magnet: r' must exceed a");

  CouplingReport rep;
  rep.r_prime = r_prime;
  rep.m_zp = magnon_zero_point(magnet.magnetization, magnet.volume(), c);
  rep.lambda_dp_prefactor = c.gamma_e * c.mu0 * rep.m_zp *
                            std::pow(magnet.radius / r_prime, 3);
  const Vec3 rh = nv.position_rel_magnet / r_prime;
  const Vec3 g = (3.0 * rh * rh.dot(nv.axis) - nv.axis) / 3.0;
  const Vec3& n = magnet.moment_direction;
  rep.f_dp = (g - n * n.dot(g)).norm();
  rep.lambda_dp = rep.lambda_dp_prefactor * rep.f_dp;
  return rep;
}

struct LibrationFrequencies {
  double omega_larmor = 0;          // omega_L = gamma_0 B0
  double omega_einstein_de_haas = 0; // omega_I = rho_mu V / (I0 gamma_0)
  double omega_libration = 0;       // sqrt(omega_L omega_I)
};

inline LibrationFrequencies libration_frequencies(const Magnet& magnet,
                                                  double b0,
                                                  const PhysicalConstants& c = {}) {
  magnet.validate();
  if (!(b0 >= 0)) throw DomainError("B0 must be >= 0");
  LibrationFrequencies f;
  f.omega_larmor = c.gamma_0 * b0;
  f.omega_einstein_de_haas =
      magnet.magnetization * magnet.volume() / (magnet.moment_of_inertia() * c.gamma_0);
  f.omega_libration = std::sqrt(f.omega_larmor * f.omega_einstein_de_haas);
  return f;
}

/// Gamma_th = k_B T / (hbar Q) in rad/s.
inline double thermal_decoherence(double temperature, double Q,
                                  const PhysicalConstants& c = {}) {
  if (!(temperature > 0) || !(Q > 0))
    throw DomainError("thermal decoherence needs T > 0 and Q > 0");
  return c.kB * temperature / (c.hbar * Q);
}

/// C = lambda^2 Q T2 hbar / (2 pi k_B T).
inline double cooperativity(double lambda, double Q, double T2,
                            double temperature, const PhysicalConstants& c = {}) {
  if (!(lambda >= 0) || !(Q > 0) || !(T2 > 0) || !(temperature > 0))
    throw DomainError("cooperativity needs lambda >= 0 and positive Q, T2, T");
  return lambda * lambda * Q * T2 * c.hbar / (kTwoPi * c.kB * temperature);
}

inline SpinMechBudget spin_mech_budget(double lambda, double temperature,
                                       double Q, double T2,
                                       const PhysicalConstants& c = {}) {
  return {temperature, Q, T2, thermal_decoherence(temperature, Q, c),
          cooperativity(lambda, Q, T2, temperature, c)};
}

/// Mode frequency under the scaling ansatz omega / 2 pi = alpha a^(-n).
inline double scaled_mode_omega(double alpha, double n, double radius) {
  if (!(alpha > 0) || !(radius > 0)) throw DomainError("scaling needs alpha, a > 0");
  return kTwoPi * alpha * std::pow(radius, -n);
}

struct OptimalRadius {
  double radius = 0;   // a* [m]
  double omega = 0;    // mode frequency at a* [rad/s]
  double x_zp = 0;     // m
  double lambda_g = 0; // rad/s, at f_g = 1
};

/// a* = (n + 3) / (5 - n) d_min maximizes the gradient coupling at fixed gap
/// when omega / 2 pi = alpha a^(-n). The coupling is reported at f_g = 1 for
/// a magnet of the given material at r' = a* + d_min.
inline OptimalRadius optimal_radius(double n, double d_min, double alpha,
                                    double mass_density, double magnetization,
                                    const PhysicalConstants& c = {}) {
  if (!(n >= 0) || !(n < 5)) throw DomainError("scaling exponent must lie in [0, 5)");
  if (!(d_min > 0)) throw DomainError("minimum gap must be > 0");
  OptimalRadius out;
  out.radius = (n + 3.0) / (5.0 - n) * d_min;
  const Magnet m{out.radius, mass_density, magnetization, Vec3::UnitZ()};
  m.validate();
  out.omega = scaled_mode_omega(alpha, n, out.radius);
  out.x_zp = zero_point_motion(m.mass(), out.omega, c);
  out.lambda_g = gradient_coupling_prefactor(magnetization, out.radius,
                                             out.radius + d_min, out.x_zp, c);
  return out;
}

} // namespace levmag
