// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Point-dipole magnetostatics and the frozen-image model of a hard magnet
// levitated above a flux-pinning superconductor occupying z < 0.
//
// The superconductor response is represented by two image dipoles below the
// surface:
//   * a diamagnetic image that mirrors the current dipole, and
//   * a frozen image fixed at cooldown, equal to minus the diamagnetic image
//     of the cooldown dipole.
// At the cooldown pose the two images cancel, so the superconductor exerts
// neither force nor torque there. Away from it the images pull the magnet
// back, giving a three dimensional trap.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Eigenvalues>

#include "levmag/constants.hpp"
#include "levmag/errors.hpp"
#include "levmag/roots.hpp"
#include "levmag/vector.hpp"

namespace levmag {

/// Uniformly magnetized sphere.
struct Magnet {
  double radius = 0;        // a [m]
  double mass_density = 0;  // rho [kg/m^3]
  double magnetization = 0; // rho_mu [A/m]
  Vec3 moment_direction = Vec3::UnitZ();

  void validate() const {
    if (!(radius > 0)) throw DomainError("magnet radius must be > 0");
    if (!(mass_density > 0)) throw DomainError("mass density must be > 0");
    if (!(magnetization > 0)) throw DomainError("magnetization must be > 0");
    require_unit(moment_direction, "magnet moment direction");
  }

  double volume() const { return 4.0 / 3.0 * kPi * radius * radius * radius; }
  double mass() const { return mass_density * volume(); }
  /// Total dipole moment magnitude [A m^2].
  double moment() const { return magnetization * volume(); }
  /// I0 = (2/5) m a^2 for a homogeneous sphere.
  double moment_of_inertia() const { return 0.4 * mass() * radius * radius; }
};

/// Position of the magnet center (z above the superconductor surface) and
/// orientation of its moment.
struct Pose {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::UnitZ();

  void validate() const {
    if (!position.allFinite()) throw DomainError("pose position not finite");
    if (!(position.z() > 0))
      throw DomainError("magnet must be above the superconductor (z > 0)");
    require_unit(orientation, "pose orientation", 1e-9);
  }
};

struct PointDipole {
  Vec3 position = Vec3::Zero();
  Vec3 moment = Vec3::Zero(); // A m^2
};

struct ImagePair {
  PointDipole frozen;
  PointDipole diamagnetic;
};

/// Field of a point dipole: B = mu0/(4 pi) [3 r^(m.r^) - m] / |r|^3.
inline Vec3 dipole_field(const Vec3& moment, const Vec3& source_pos,
                         const Vec3& eval_pos,
                         const PhysicalConstants& c = {}) {
  const Vec3 r = eval_pos - source_pos;
  const double rn = r.norm();
  if (!(rn > 0)) throw DomainError("dipole field evaluated at the source");
  const Vec3 rh = r / rn;
  const double k = c.mu0 / (4.0 * kPi) / (rn * rn * rn);
  return k * (3.0 * rh * moment.dot(rh) - moment);
}

/// Force on dipole `m1` at `p1` due to dipole `m2` at `p2`.
inline Vec3 dipole_dipole_force(const Vec3& m1, const Vec3& p1, const Vec3& m2,
                                const Vec3& p2,
                                const PhysicalConstants& c = {}) {
  const Vec3 r = p1 - p2;
  const double rn = r.norm();
  if (!(rn > 0)) throw DomainError("coincident dipoles");
  const Vec3 rh = r / rn;
  const double a = m1.dot(rh);
  const double b = m2.dot(rh);
  const double k = 3.0 * c.mu0 / (4.0 * kPi * std::pow(rn, 4));
  return k * (a * m2 + b * m1 + m1.dot(m2) * rh - 5.0 * a * b * rh);
}

/// Mirror image of a dipole in a perfect diamagnet filling z < 0:
/// position (x, y, -z), moment (m_x, m_y, -m_z).
inline PointDipole diamagnetic_image(const PointDipole& d) {
  return {Vec3(d.position.x(), d.position.y(), -d.position.z()),
          Vec3(d.moment.x(), d.moment.y(), -d.moment.z())};
}

inline PointDipole frozen_image(const Pose& cooldown, const Magnet& magnet) {
  PointDipole img = diamagnetic_image(
      {cooldown.position, magnet.moment() * cooldown.orientation});
  img.moment = -img.moment;
  return img;
}

inline ImagePair image_system(const Pose& cooldown, const Pose& current,
                              const Magnet& magnet) {
  cooldown.validate();
  current.validate();
  return {frozen_image(cooldown, magnet),
          diamagnetic_image(
              {current.position, magnet.moment() * current.orientation})};
}

/// Magnet plus the frozen image captured at cooldown. Immutable.
class TrapSystem {
 public:
  TrapSystem(Magnet magnet, Pose cooldown, bool include_gravity = true,
             PhysicalConstants constants = {})
      : magnet_(std::move(magnet)),
        cooldown_(std::move(cooldown)),
        include_gravity_(include_gravity),
        constants_(constants) {
    magnet_.validate();
    cooldown_.validate();
    constants_.validate();
    frozen_ = levmag::frozen_image(cooldown_, magnet_);
  }

  const Magnet& magnet() const { return magnet_; }
  const Pose& cooldown() const { return cooldown_; }
  const PointDipole& frozen_image() const { return frozen_; }
  bool include_gravity() const { return include_gravity_; }
  const PhysicalConstants& constants() const { return constants_; }

  double weight() const { return magnet_.mass() * constants_.g; }

 private:
  Magnet magnet_;
  Pose cooldown_;
  bool include_gravity_;
  PhysicalConstants constants_;
  PointDipole frozen_;
};

/// U = -mu.B_frozen - 1/2 mu.B_dia + m g z.
inline double trap_potential(const TrapSystem& trap, const Pose& pose) {
  pose.validate();
  const auto& c = trap.constants();
  const Vec3 mu = trap.magnet().moment() * pose.orientation;
  const PointDipole& fr = trap.frozen_image();
  const PointDipole dia = diamagnetic_image({pose.position, mu});
  double u = -mu.dot(dipole_field(fr.moment, fr.position, pose.position, c)) -
             0.5 * mu.dot(dipole_field(dia.moment, dia.position, pose.position, c));
  if (trap.include_gravity()) u += trap.weight() * pose.position.z();
  return u;
}

/// Force and torque exerted by the superconductor (both images), excluding
/// gravity.
struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

inline Wrench image_wrench(const TrapSystem& trap, const Pose& pose) {
  pose.validate();
  const auto& c = trap.constants();
  const Vec3 mu = trap.magnet().moment() * pose.orientation;
  const PointDipole& fr = trap.frozen_image();
  const PointDipole dia = diamagnetic_image({pose.position, mu});
  Wrench w;
  // The induced image moves with the magnet at twice the rate along z, which
  // cancels the 1/2 in its energy; laterally the separation is fixed.
  const Vec3 f_dia =
      dipole_dipole_force(mu, pose.position, dia.moment, dia.position, c);
  w.force = dipole_dipole_force(mu, pose.position, fr.moment, fr.position, c) +
            Vec3(0, 0, f_dia.z());
  const Vec3 b = dipole_field(fr.moment, fr.position, pose.position, c) +
                 dipole_field(dia.moment, dia.position, pose.position, c);
  w.torque = mu.cross(b);
  return w;
}

/// Analytic gradient of trap_potential with respect to position [J/m] and to
/// the orientation vector (unconstrained, [J]).
struct PotentialGradient {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::Zero();
};

inline PotentialGradient trap_gradient(const TrapSystem& trap,
                                       const Pose& pose) {
  pose.validate();
  const auto& c = trap.constants();
  const double mu_abs = trap.magnet().moment();
  const Vec3 mu = mu_abs * pose.orientation;
  const PointDipole& fr = trap.frozen_image();
  const PointDipole dia = diamagnetic_image({pose.position, mu});
  const Wrench w = image_wrench(trap, pose);
  PotentialGradient g;
  g.position = -w.force;
  if (trap.include_gravity()) g.position.z() += trap.weight();
  g.orientation = -mu_abs * (dipole_field(fr.moment, fr.position, pose.position, c) +
                             dipole_field(dia.moment, dia.position, pose.position, c));
  return g;
}

/// Local coordinates q = (x, y, z, theta, phi) around a reference pose.
/// Translations are offsets of the center; theta and phi are rotations of the
/// moment about two axes perpendicular to the reference orientation.
class LocalCoordinates {
 public:
  static constexpr int kDim = 5;
  using Vector = Eigen::Matrix<double, kDim, 1>;
  using Matrix = Eigen::Matrix<double, kDim, kDim>;

  explicit LocalCoordinates(Pose reference) : ref_(std::move(reference)) {
    std::tie(e1_, e2_) = orthonormal_complement(ref_.orientation);
  }

  Pose pose(const Vector& q) const {
    Pose p;
    p.position = ref_.position + q.head<3>();
    p.orientation = (Eigen::AngleAxisd(q[4], e2_) *
                     Eigen::AngleAxisd(q[3], e1_) * ref_.orientation)
                        .normalized();
    return p;
  }

  Vector gradient(const TrapSystem& trap, const Vector& q) const {
    const Pose p = pose(q);
    const PotentialGradient g = trap_gradient(trap, p);
    Vector out;
    out.head<3>() = g.position;
    const Vec3 axis_theta = Eigen::AngleAxisd(q[4], e2_) * e1_;
    out[3] = g.orientation.dot(axis_theta.cross(p.orientation));
    out[4] = g.orientation.dot(e2_.cross(p.orientation));
    return out;
  }

  const Pose& reference() const { return ref_; }

 private:
  Pose ref_;
  Vec3 e1_;
  Vec3 e2_;
};

/// Symmetrized Hessian of the potential in local coordinates, by central
/// differences of the analytic gradient. Translation step
/// max(1e-9 m, 1e-6 z), rotation step 1e-6 rad.
inline LocalCoordinates::Matrix trap_hessian(const TrapSystem& trap,
                                             const Pose& at) {
  const LocalCoordinates coords(at);
  const double h_lin = std::max(1e-9, 1e-6 * at.position.z());
  const double h_ang = 1e-6;
  LocalCoordinates::Matrix hess;
  for (int j = 0; j < LocalCoordinates::kDim; ++j) {
    const double h = j < 3 ? h_lin : h_ang;
    LocalCoordinates::Vector qp = LocalCoordinates::Vector::Zero();
    LocalCoordinates::Vector qm = LocalCoordinates::Vector::Zero();
    qp[j] = h;
    qm[j] = -h;
    hess.col(j) = (coords.gradient(trap, qp) - coords.gradient(trap, qm)) / (2 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

/// Height of the zero-vertical-force point below cooldown, with lateral
/// position and orientation held at their cooldown values.
///
/// Throws InfeasibleError when the magnet would rest on the superconductor
/// (no sign change of dU/dz between contact z = a and the cooldown height).
inline double equilibrium_height(const TrapSystem& trap) {
  const Pose& cool = trap.cooldown();
  const double a = trap.magnet().radius;
  const double h_cool = cool.position.z();
  if (!trap.include_gravity()) return h_cool;
  if (!(h_cool > a))
    throw InfeasibleError("no stable levitation: cooldown height below contact");

  auto pose_at = [&](double z) {
    Pose p = cool;
    p.position.z() = z;
    return p;
  };
  auto dudz = [&](double z) { return trap_gradient(trap, pose_at(z)).position.z(); };
  auto d2udz2 = [&](double z) {
    const double h = std::max(1e-15, 1e-7 * z);
    return (dudz(z + h) - dudz(z - h)) / (2 * h);
  };
  const double ftol = 1e-11 * trap.weight();
  const auto root = find_root_bracketed(dudz, d2udz2, a, h_cool, ftol);
  if (!root || dudz(a) >= 0)
    throw InfeasibleError(
        "no stable levitation: magnet too heavy or cooldown too high");
  return *root;
}

/// Cooldown height that makes the magnet levitate at `target_height` (same
/// lateral position and orientation as `cooldown_template`).
inline double cooldown_height_for(const Magnet& magnet,
                                  const Pose& cooldown_template,
                                  double target_height, bool include_gravity,
                                  const PhysicalConstants& c = {}) {
  if (!(target_height > magnet.radius))
    throw InfeasibleError("target levitation height below contact");
  if (!include_gravity) return target_height;
  auto dudz = [&](double h_cool) {
    Pose cool = cooldown_template;
    cool.position.z() = h_cool;
    const TrapSystem trap(magnet, cool, true, c);
    Pose at = cool;
    at.position.z() = target_height;
    return trap_gradient(trap, at).position.z();
  };
  // dU/dz at the target is +m g for h_cool = target and falls towards the
  // bare diamagnetic repulsion as h_cool grows.
  auto f = [&](double h_cool) { return -dudz(h_cool); };
  double lo = target_height;
  double hi = 2 * target_height;
  int guard = 0;
  while (f(hi) < 0) {
    lo = hi;
    hi *= 2;
    if (++guard > 60)
      throw InfeasibleError("no cooldown height levitates at the target");
  }
  auto df = [&](double x) {
    const double h = 1e-7 * x;
    return (f(x + h) - f(x - h)) / (2 * h);
  };
  const double ftol = 1e-11 * magnet.mass() * c.g;
  const auto root = find_root_bracketed(f, df, lo, hi, ftol);
  if (!root) throw InfeasibleError("no cooldown height levitates at the target");
  return *root;
}

struct Mode {
  std::string label;
  double omega = 0;         // rad/s; 0 for unstable modes
  double omega_squared = 0; // signed eigenvalue of the mass-weighted Hessian
  bool stable = false;
};

/// Trap normal modes at equilibrium. `modes` is ordered x, y, z, theta, phi;
/// each normal mode is labelled by the coordinate dominating its eigenvector.
struct ModeSpectrum {
  std::array<Mode, 5> modes;
  double h_lev = 0;

  const Mode& operator[](std::string_view label) const {
    for (const auto& m : modes)
      if (m.label == label) return m;
    throw DomainError("unknown mode label " + std::string(label));
  }
  bool all_stable() const {
    return std::all_of(modes.begin(), modes.end(),
                       [](const Mode& m) { return m.stable; });
  }
};

inline ModeSpectrum modes_from_hessian(const LocalCoordinates::Matrix& hessian,
                                       double mass, double inertia,
                                       double h_lev) {
  static const std::array<const char*, 5> kLabels = {"x", "y", "z", "theta", "phi"};
  Eigen::Matrix<double, 5, 1> inv_sqrt_m;
  inv_sqrt_m << 1 / std::sqrt(mass), 1 / std::sqrt(mass), 1 / std::sqrt(mass),
      1 / std::sqrt(inertia), 1 / std::sqrt(inertia);
  const LocalCoordinates::Matrix k =
      inv_sqrt_m.asDiagonal() * hessian * inv_sqrt_m.asDiagonal();
  Eigen::SelfAdjointEigenSolver<LocalCoordinates::Matrix> es(
      0.5 * (k + k.transpose()));
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();

  // Greedy assignment: repeatedly take the largest remaining
  // (coordinate, eigenvector) weight.
  std::array<int, 5> coord_of_vec;
  coord_of_vec.fill(-1);
  std::array<bool, 5> coord_used{};
  for (int round = 0; round < 5; ++round) {
    double best = -1;
    int bi = -1;
    int bj = -1;
    for (int j = 0; j < 5; ++j) {
      if (coord_of_vec[j] >= 0) continue;
      for (int i = 0; i < 5; ++i) {
        if (coord_used[i]) continue;
        const double w = vecs(i, j) * vecs(i, j);
        if (w > best) {
          best = w;
          bi = i;
          bj = j;
        }
      }
    }
    coord_of_vec[bj] = bi;
    coord_used[bi] = true;
  }

  ModeSpectrum spec;
  spec.h_lev = h_lev;
  for (int j = 0; j < 5; ++j) {
    Mode& m = spec.modes[coord_of_vec[j]];
    m.label = kLabels[coord_of_vec[j]];
    m.omega_squared = vals[j];
    m.stable = std::isfinite(vals[j]) && vals[j] > 0;
    m.omega = m.stable ? std::sqrt(vals[j]) : 0.0;
  }
  return spec;
}

inline ModeSpectrum mode_frequencies(const TrapSystem& trap) {
  const double h = equilibrium_height(trap);
  Pose eq = trap.cooldown();
  eq.position.z() = h;
  return modes_from_hessian(trap_hessian(trap, eq), trap.magnet().mass(),
                            trap.magnet().moment_of_inertia(), h);
}

/// f = f0 * h_norm^(-gamma_exp).
inline double power_law_frequency(double f0, double gamma_exp, double h_norm) {
  if (!(f0 > 0) || !(h_norm > 0) || !std::isfinite(gamma_exp))
    throw DomainError("power law needs f0 > 0 and h_norm > 0");
  return f0 * std::pow(h_norm, -gamma_exp);
}

} // namespace levmag
