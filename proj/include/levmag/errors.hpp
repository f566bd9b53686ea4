// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace levmag {

/// Input outside the domain of a formula (non-positive mass, coincident
/// points, NV inside the magnet, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid configuration detected before any work is done.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested physical configuration does not exist (e.g. no stable
/// levitation point).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few samples for a statistical estimate.
class StatisticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Calibration tone carried no usable power.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit required by the pipeline did not converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

} // namespace levmag
