// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "levmag/magnetostatics.hpp"
#include "test_util.hpp"

namespace levmag {
namespace {

using test::rel;

Magnet reference_magnet(double radius = 15.1e-6, double rho = 7430) {
  const PhysicalConstants c;
  return Magnet{radius, rho, 0.75 / c.mu0, Vec3::UnitZ()};
}

Pose vertical_pose(double z) { return Pose{Vec3(0, 0, z), Vec3::UnitZ()}; }

TEST(Magnet, DerivedAccessors) {
  const Magnet m = reference_magnet(2e-6, 5000);
  const double v = 4.0 / 3.0 * kPi * 8e-18;
  EXPECT_LT(rel(m.volume(), v), 1e-12);
  EXPECT_LT(rel(m.mass(), 5000 * v), 1e-12);
  EXPECT_LT(rel(m.moment(), m.magnetization * v), 1e-12);
  EXPECT_LT(rel(m.moment_of_inertia(), 0.4 * m.mass() * 4e-12), 1e-12);
}

TEST(Magnet, ValidationRejectsBadFields) {
  Magnet m = reference_magnet();
  m.radius = 0;
  EXPECT_THROW(m.validate(), DomainError);
  m = reference_magnet();
  m.moment_direction = Vec3(0, 0, 1.1);
  EXPECT_THROW(m.validate(), DomainError);
  EXPECT_THROW(vertical_pose(-1e-6).validate(), DomainError);
}

TEST(DipoleField, OnAxisAndEquatorial) {
  const Vec3 m(0, 0, 1);
  const Vec3 on = dipole_field(m, Vec3::Zero(), Vec3(0, 0, 1));
  EXPECT_NEAR(on.z(), 2e-7, 1e-15);
  EXPECT_NEAR(on.x(), 0, 1e-20);
  const Vec3 eq = dipole_field(m, Vec3::Zero(), Vec3(1, 0, 0));
  EXPECT_NEAR(eq.z(), -1e-7, 1e-15);
  EXPECT_NEAR(eq.x(), 0, 1e-20);
}

TEST(DipoleField, CoincidentPointsThrow) {
  EXPECT_THROW(dipole_field(Vec3::UnitZ(), Vec3::Zero(), Vec3::Zero()),
               DomainError);
}

TEST(DipoleField, DivergenceAndCurlVanish) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 m(u(rng), u(rng), u(rng));
    const Vec3 src(u(rng), u(rng), u(rng));
    const Vec3 r = test::random_unit(rng) * (0.5 + std::abs(u(rng)));
    const Vec3 p = src + r;
    const double h = 1e-6 * r.norm();
    Eigen::Matrix3d jac;
    for (int j = 0; j < 3; ++j) {
      Vec3 dp = Vec3::Zero();
      dp[j] = h;
      jac.col(j) = (dipole_field(m, src, p + dp) - dipole_field(m, src, p - dp)) / (2 * h);
    }
    const double scale = jac.norm();
    EXPECT_LT(std::abs(jac.trace()) / scale, 1e-6);
    EXPECT_LT((jac - jac.transpose()).norm() / scale, 1e-6);
  }
}

TEST(ImageSystem, ImagesCancelAtCooldown) {
  const Magnet mag = reference_magnet();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const Pose cool{Vec3(1e-5, -2e-5, 5e-5), test::random_unit(rng)};
    const ImagePair im = image_system(cool, cool, mag);
    const Vec3 b = dipole_field(im.frozen.moment, im.frozen.position, cool.position) +
                   dipole_field(im.diamagnetic.moment, im.diamagnetic.position,
                                cool.position);
    EXPECT_LT(b.norm(), 1e-15);
  }
}

TEST(ImageSystem, MirrorConventions) {
  const Magnet mag = reference_magnet();
  const double mu = mag.moment();
  const Pose cool = vertical_pose(50e-6);
  const Pose cur{Vec3(1e-6, 2e-6, 40e-6), Vec3(0.6, 0, 0.8)};
  const ImagePair im = image_system(cool, cur, mag);
  EXPECT_EQ(im.diamagnetic.position, Vec3(1e-6, 2e-6, -40e-6));
  EXPECT_LT((im.diamagnetic.moment - mu * Vec3(0.6, 0, -0.8)).norm(), 1e-15 * mu);
  EXPECT_EQ(im.frozen.position, Vec3(0, 0, -50e-6));
  const PointDipole dia_cool = diamagnetic_image({cool.position, mu * cool.orientation});
  EXPECT_LT((im.frozen.moment + dia_cool.moment).norm(), 1e-15 * mu);

  // Vertical moment: diamagnetic image alone repels the magnet (+z).
  const ImagePair v = image_system(cool, vertical_pose(40e-6), mag);
  const Vec3 f = dipole_dipole_force(mu * Vec3::UnitZ(), Vec3(0, 0, 40e-6),
                                     v.diamagnetic.moment, v.diamagnetic.position);
  EXPECT_GT(f.z(), 0);
}

TEST(TrapPotential, GradientAtCooldownIsGravity) {
  const Magnet mag = reference_magnet();
  const TrapSystem trap(mag, vertical_pose(45e-6));
  const PotentialGradient g = trap_gradient(trap, trap.cooldown());
  EXPECT_LT((g.position - Vec3(0, 0, trap.weight())).norm(), 1e-9 * trap.weight());
  EXPECT_THROW(trap_potential(trap, vertical_pose(0.0)), DomainError);
}

TEST(TrapPotential, ZeroWrenchAtRandomCooldownPoses) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    const Magnet mag = reference_magnet(1e-6 * (1 + 20 * std::abs(u(rng))));
    const Pose cool{Vec3(1e-4 * u(rng), 1e-4 * u(rng), mag.radius * (1.5 + 5 * std::abs(u(rng)))),
                    test::random_unit(rng)};
    const TrapSystem trap(mag, cool);
    const Wrench w = image_wrench(trap, cool);
    EXPECT_LT(w.force.norm(), 1e-9 * trap.weight());
    EXPECT_LT(w.torque.norm(), 1e-9 * trap.weight() * mag.radius);
  }
}

TEST(TrapPotential, AnalyticGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const Magnet mag = reference_magnet();
  for (int i = 0; i < 100; ++i) {
    const Pose cool{Vec3(0, 0, mag.radius * (2 + 4 * std::abs(u(rng)))), test::random_unit(rng)};
    const TrapSystem trap(mag, cool);
    Pose p{cool.position + 0.3 * mag.radius * Vec3(u(rng), u(rng), u(rng)),
           (cool.orientation + 0.2 * Vec3(u(rng), u(rng), u(rng))).normalized()};
    const PotentialGradient g = trap_gradient(trap, p);
    const double h = 1e-6 * p.position.z();
    const double scale = g.position.norm();
    for (int j = 0; j < 3; ++j) {
      Pose pp = p, pm = p;
      pp.position[j] += h;
      pm.position[j] -= h;
      const double fd = (trap_potential(trap, pp) - trap_potential(trap, pm)) / (2 * h);
      EXPECT_LT(std::abs(fd - g.position[j]) / scale, 1e-6) << "pose " << i << " axis " << j;
    }
    // Orientation: derivative along tangent rotations.
    const auto [e1, e2] = orthonormal_complement(p.orientation);
    for (const Vec3& ax : {e1, e2}) {
      const double th = 1e-6;
      Pose pp = p, pm = p;
      pp.orientation = Eigen::AngleAxisd(th, ax) * p.orientation;
      pm.orientation = Eigen::AngleAxisd(-th, ax) * p.orientation;
      const double fd = (trap_potential(trap, pp) - trap_potential(trap, pm)) / (2 * th);
      const double an = g.orientation.dot(ax.cross(p.orientation));
      const double oscale = g.orientation.norm() + 1e-30;
      EXPECT_LT(std::abs(fd - an) / oscale, 1e-6);
    }
  }
}

TEST(TrapPotential, VerticalForceMatchesFiniteDifference) {
  const Magnet mag = reference_magnet();
  const TrapSystem trap(mag, vertical_pose(50e-6));
  const Pose p = vertical_pose(42e-6);
  const double h = 1e-6 * p.position.z();
  Pose pp = p, pm = p;
  pp.position.z() += h;
  pm.position.z() -= h;
  const double fd = (trap_potential(trap, pp) - trap_potential(trap, pm)) / (2 * h);
  EXPECT_LT(rel(fd, trap_gradient(trap, p).position.z()), 1e-8);
}

TEST(TrapPotential, RotationAboutNormalInvariance) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  const Magnet mag = reference_magnet();
  for (int i = 0; i < 20; ++i) {
    const Pose cool{Vec3(5e-6 * u(rng), 5e-6 * u(rng), 50e-6), test::random_unit(rng)};
    const Pose cur{cool.position + Vec3(3e-6 * u(rng), 3e-6 * u(rng), -5e-6),
                   (cool.orientation + 0.1 * test::random_unit(rng)).normalized()};
    const Eigen::AngleAxisd rot(kTwoPi * u(rng), Vec3::UnitZ());
    const Pose cool_r{rot * cool.position, rot * cool.orientation};
    const Pose cur_r{rot * cur.position, rot * cur.orientation};
    const double u0 = trap_potential(TrapSystem(mag, cool), cur);
    const double u1 = trap_potential(TrapSystem(mag, cool_r), cur_r);
    EXPECT_LT(std::abs(u1 - u0), 1e-10 * std::abs(u0));
  }
}

TEST(Equilibrium, BelowCooldownAndForceFree) {
  const Magnet mag = reference_magnet();
  const TrapSystem trap(mag, vertical_pose(60e-6));
  const double h = equilibrium_height(trap);
  EXPECT_LT(h, 60e-6);
  EXPECT_GT(h, mag.radius);
  Pose eq = trap.cooldown();
  eq.position.z() = h;
  EXPECT_LT(std::abs(trap_gradient(trap, eq).position.z()), 1e-9 * trap.weight());
}

TEST(Equilibrium, HeavierMagnetSitsLower) {
  const Pose cool = vertical_pose(100e-6);
  const double h1 = equilibrium_height(TrapSystem(reference_magnet(15.1e-6, 7430), cool));
  const double h2 = equilibrium_height(TrapSystem(reference_magnet(15.1e-6, 2 * 7430), cool));
  EXPECT_LT(h2, h1);
}

TEST(Equilibrium, MatchesGridArgmin) {
  const Magnet mag = reference_magnet(15.1e-6, 3e4);
  const TrapSystem trap(mag, vertical_pose(100e-6));
  const double h = equilibrium_height(trap);
  const int n = 100000;
  const double lo = mag.radius * 1.01;
  const double hi = 100e-6;
  const double step = (hi - lo) / (n - 1);
  double best = lo;
  double best_u = INFINITY;
  for (int i = 0; i < n; ++i) {
    const double z = lo + i * step;
    const double uz = trap_potential(trap, vertical_pose(z));
    if (uz < best_u) {
      best_u = uz;
      best = z;
    }
  }
  EXPECT_LE(std::abs(best - h), step);
}

TEST(Equilibrium, TooHeavyIsInfeasible) {
  const Magnet mag = reference_magnet(15.1e-6, 1e9);
  EXPECT_THROW(equilibrium_height(TrapSystem(mag, vertical_pose(200e-6))),
               InfeasibleError);
}

TEST(ModeFrequencies, HorizontalDegeneracy) {
  const TrapSystem trap(reference_magnet(), vertical_pose(50e-6));
  const ModeSpectrum s = mode_frequencies(trap);
  EXPECT_TRUE(s.all_stable());
  EXPECT_LT(rel(s["x"].omega, s["y"].omega), 1e-6);
  EXPECT_GT(s.h_lev, 0);
}

// Dipole scaling: without gravity the equilibrium is the cooldown height, so
// h_lev is set directly. The vertical mode and the translational diagonal
// stiffnesses are pure dipole scalings.
TEST(ModeFrequencies, DipoleScalingExponent) {
  const Magnet mag = reference_magnet(15.5e-6);
  std::vector<double> lh, lz, lx;
  for (double hn : test::logspace(2, 6, 12)) {
    const TrapSystem trap(mag, vertical_pose(hn * mag.radius), false);
    const ModeSpectrum s = mode_frequencies(trap);
    Pose eq = trap.cooldown();
    const auto hess = trap_hessian(trap, eq);
    lh.push_back(std::log(hn));
    lz.push_back(std::log(s["z"].omega));
    lx.push_back(std::log(std::sqrt(hess(0, 0) / mag.mass())));
  }
  EXPECT_NEAR(-test::ols(lh, lz).first, 2.5, 0.05);
  EXPECT_NEAR(-test::ols(lh, lx).first, 2.5, 0.05);
}

TEST(ModeFrequencies, PrefactorScalesInverselyWithRadius) {
  std::vector<double> prod;
  for (double a : {1e-6, 2e-6, 4e-6}) {
    const Magnet mag = reference_magnet(a);
    const TrapSystem trap(mag, vertical_pose(3 * a), false);
    prod.push_back(mode_frequencies(trap)["z"].omega * a);
  }
  for (double p : prod) EXPECT_LT(rel(p, prod[0]), 0.01);
}

TEST(ModeFrequencies, NegativeEigenvalueFlaggedNotThrown) {
  LocalCoordinates::Matrix h = LocalCoordinates::Matrix::Identity();
  h(2, 2) = -1;
  ModeSpectrum s;
  ASSERT_NO_THROW(s = modes_from_hessian(h, 1.0, 1.0, 1e-5));
  EXPECT_FALSE(s["z"].stable);
  EXPECT_EQ(s["z"].omega, 0.0);
  EXPECT_TRUE(s["x"].stable);
  EXPECT_FALSE(s.all_stable());
}

TEST(PowerLaw, PaperExamples) {
  EXPECT_DOUBLE_EQ(power_law_frequency(8.8e3, 2.1, 1.0), 8.8e3);
  EXPECT_NEAR(power_law_frequency(5.6e3, 2.0, 2.0), 1.4e3, 1e-9);
  EXPECT_DOUBLE_EQ(power_law_frequency(123.0, 0.0, 7.0), 123.0);
  EXPECT_THROW(power_law_frequency(-1, 2, 2), DomainError);
  EXPECT_THROW(power_law_frequency(1, 2, 0), DomainError);
}

} // namespace
} // namespace levmag
