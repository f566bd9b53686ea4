// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "levmag/errors.hpp"

namespace levmag {

using Vec3 = Eigen::Vector3d;

/// Throws unless |v| = 1 within `tol`.
inline void require_unit(const Vec3& v, const char* what, double tol = 1e-12) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > tol)
    throw DomainError(std::string(what) + " must be a unit vector");
}

/// Two unit vectors completing `n` to a right-handed orthonormal frame.
inline std::pair<Vec3, Vec3> orthonormal_complement(const Vec3& n) {
  const Vec3 seed = std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  Vec3 e1 = seed.cross(n).normalized();
  Vec3 e2 = n.cross(e1);
  return {e1, e2};
}

} // namespace levmag
